"""
Lower-bound constructions and their verifier.

Each generator returns a plain Family; verify_construction re-checks the
size formula and the freeness predicate with the independent predicates of
`embedding` (and structural checks such as downward closure), never with
construction-specific shortcuts.
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from src import embedding
from src.core_sets import Family, check_n, is_downward_closed, levels_between, mask_elements, popcount
from src.errors import UsageError
from src.models import ConstructionReport
from src.posets import Poset, butterfly, p_m_gadget, vee

PREDICATES = ("p_free", "l_trace_p_free", "trace_p_free")


def consecutive_levels(n: int, j: int, k: int) -> Family:
    """C([n], j+1) ∪ ... ∪ C([n], j+k)."""
    check_n(n)
    if j < -1 or k < 1 or j + k > n:
        raise UsageError(f"levels j+1..j+k must lie in 0..{n}, got j={j}, k={k}")
    return levels_between(n, j + 1, j + k)


def consecutive_levels_size(n: int, j: int, k: int) -> int:
    return sum(math.comb(n, j + i) for i in range(1, k + 1))


def butterfly_lower(n: int) -> Family:
    """∅, all singletons and ⌊n/2⌋ pairwise disjoint pairs {1,2}, {3,4}, ..."""
    check_n(n)
    masks = [0] + [1 << j for j in range(n)] + [0b11 << (2 * i) for i in range(n // 2)]
    return Family.of(n, masks)


def butterfly_lower_size(n: int) -> int:
    return 3 * n // 2 + 1


def mod_sum_classes(n: int) -> List[Family]:
    """
    The middle level C([n], ⌊n/2⌋) split by element sum: classes[i] holds the
    sets whose elements sum to i mod n.
    """
    check_n(n)
    if n < 2:
        raise UsageError(f"mod-sum classes need n >= 2, got {n}")
    buckets: List[List[int]] = [[] for _ in range(n)]
    for bits in levels_between(n, n // 2, n // 2).members:
        buckets[sum(mask_elements(bits)) % n].append(bits)
    return [Family(n, tuple(b)) for b in buckets]


def top_class_residues(n: int, s: int) -> List[int]:
    """Residues of the s largest classes; equal sizes prefer the smaller residue."""
    classes = mod_sum_classes(n)
    ranked = sorted(range(n), key=lambda i: (-len(classes[i]), i))
    return sorted(ranked[:s])


def top_classes(n: int, s: int) -> Family:
    """Union of the s largest mod-sum classes."""
    if s < 1 or s > n:
        raise UsageError(f"s must be in 1..{n}, got {s}")
    classes = mod_sum_classes(n)
    members = [bits for i in top_class_residues(n, s) for bits in classes[i].members]
    return Family.of(n, members)


def top_classes_size_floor(n: int, s: int) -> int:
    """ceil(s/n · C(n, ⌊n/2⌋))."""
    return -(-s * math.comb(n, n // 2) // n)


def balanced_parts(n: int, m: int) -> List[Tuple[int, ...]]:
    """[n] cut into m runs of consecutive elements, sizes ⌈n/m⌉ first, then ⌊n/m⌋."""
    if m < 1 or m > n:
        raise UsageError(f"m must be in 1..{n}, got {m}")
    big, extra = divmod(n, m)
    parts, start = [], 1
    for i in range(m):
        size = big + (1 if i < extra else 0)
        parts.append(tuple(range(start, start + size)))
        start += size
    return parts


def p_m_family(n: int, m: int) -> Family:
    """Sets meeting every part of balanced_parts(n, m) in at most one element."""
    check_n(n)
    parts = balanced_parts(n, m)
    masks = [0]
    for part in parts:
        grown = []
        for bits in masks:
            grown.append(bits)
            grown.extend(bits | 1 << (e - 1) for e in part)
        masks = grown
    return Family.of(n, masks)


def p_m_family_size(n: int, m: int) -> int:
    return math.prod(len(part) + 1 for part in balanced_parts(n, m))


def shadow_overload(fam: Family, s: int) -> Optional[Tuple[int, int]]:
    """A set one level below the members that lies in more than s of them, with its count."""
    counts: Dict[int, int] = {}
    for bits in fam.members:
        rest = bits
        while rest:
            low = rest & -rest
            counts[bits ^ low] = counts.get(bits ^ low, 0) + 1
            rest ^= low
    for G in sorted(counts):
        if counts[G] > s:
            return G, counts[G]
    return None


def verify_construction(name: str, params: Dict[str, Any], fam: Family, claimed_size: int,
                        predicate: Optional[str] = None, poset: Optional[Poset] = None,
                        l: Optional[int] = None, size_rule: str = "equal",
                        downward_closed: bool = False) -> ConstructionReport:
    """
    Check a generated family against its size formula and a freeness predicate.

    size_rule "equal" requires |fam| == claimed_size, "at_least" requires
    |fam| >= claimed_size. Failures are listed first violated first.
    """
    if predicate is not None and predicate not in PREDICATES:
        raise UsageError(f"predicate must be one of {PREDICATES}, got {predicate!r}")
    if predicate is not None and poset is None:
        raise UsageError("a predicate needs a poset")
    failures: List[str] = []
    violation: Optional[Dict[str, Any]] = None

    size = len(fam)
    if size_rule == "equal" and size != claimed_size:
        failures.append(f"size {size} differs from the formula value {claimed_size}")
    if size_rule == "at_least" and size < claimed_size:
        failures.append(f"size {size} is below the guaranteed {claimed_size}")
    if downward_closed and not is_downward_closed(fam):
        failures.append("family is not downward closed")

    predicate_id = None
    if predicate is not None:
        predicate_id = f"{predicate}({poset.label()}{', l=' + str(l) if l is not None else ''})"
        if predicate == "p_free":
            found = embedding.find_copy(fam, poset)
            if found is not None:
                failures.append(f"family contains {poset.label()}")
                violation = found.to_json()
        elif predicate == "l_trace_p_free":
            if l is None:
                raise UsageError("l_trace_p_free needs l")
            trace_violation = embedding.find_l_trace_violation(fam, poset, l)
            if trace_violation is not None:
                failures.append(f"a trace on an {l}-set contains {poset.label()}")
                violation = trace_violation.to_json()
        else:
            trace_violation = embedding.find_trace_violation(fam, poset)
            if trace_violation is not None:
                failures.append(f"a trace on a {trace_violation.l}-set contains {poset.label()}")
                violation = trace_violation.to_json()

    return ConstructionReport(
        name=name, params=params, family=fam, claimed_size=claimed_size,
        predicate=predicate_id, passed=not failures, failures=failures, violation=violation,
    )


@dataclass(frozen=True)
class _Recipe:
    build: Callable[..., Family]
    size: Callable[..., int]
    params: Tuple[str, ...]
    size_rule: str = "equal"
    downward_closed: bool = False


CONSTRUCTIONS: Dict[str, _Recipe] = {
    "butterfly_lower": _Recipe(butterfly_lower, butterfly_lower_size, ("n",), downward_closed=True),
    "mod_sum": _Recipe(top_classes, top_classes_size_floor, ("n", "s"), size_rule="at_least"),
    "p_m": _Recipe(p_m_family, p_m_family_size, ("n", "m"), downward_closed=True),
    "levels": _Recipe(consecutive_levels, consecutive_levels_size, ("n", "j", "k")),
}


def default_predicate(name: str, params: Dict[str, Any]) -> Tuple[Optional[str], Optional[Poset], Optional[int]]:
    """The freeness claim each construction is built to satisfy."""
    if name == "butterfly_lower":
        return "trace_p_free", butterfly(), None
    if name == "mod_sum":
        return "l_trace_p_free", vee(params["s"]), params["n"] - 1
    if name == "p_m":
        return "p_free", p_m_gadget(params["m"]), None
    return None, None, None


def run_construction(name: str, params: Dict[str, Any], predicate: Optional[str] = None,
                     poset: Optional[Poset] = None, l: Optional[int] = None) -> ConstructionReport:
    """
    Build a named construction and verify it.

    Without an explicit predicate the construction's own claim is checked.
    mod_sum additionally counts how many members cover each set one level
    down; p_m records whether the gadget could embed at all.
    """
    if name not in CONSTRUCTIONS:
        raise UsageError(f"unknown construction {name!r}; known: {', '.join(sorted(CONSTRUCTIONS))}")
    recipe = CONSTRUCTIONS[name]
    missing = [key for key in recipe.params if params.get(key) is None]
    if missing:
        raise UsageError(f"construction {name} needs {', '.join(missing)}")
    args = [params[key] for key in recipe.params]
    clean = dict(zip(recipe.params, args))
    if predicate is None:
        predicate, poset, l = default_predicate(name, clean)

    fam = recipe.build(*args)
    report = verify_construction(name, clean, fam, recipe.size(*args), predicate=predicate, poset=poset,
                                 l=l, size_rule=recipe.size_rule, downward_closed=recipe.downward_closed)

    if name == "mod_sum":
        overload = shadow_overload(fam, clean["s"])
        if overload is not None:
            G, count = overload
            report.failures.append(f"{list(mask_elements(G))} lies in {count} members, more than {clean['s']}")
            report.passed = False
    if name == "p_m" and poset is not None:
        # Too few members, or no 2-sets, and the gadget cannot embed for cardinality reasons alone.
        report.params["substantive"] = len(fam) >= poset.p and max(map(popcount, fam.members)) >= 2
    return report
