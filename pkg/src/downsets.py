"""
Downward-closed families and the arrow relation.

(n,m) -> (k,l) holds if every family of m subsets of [n] has a k-set X with
|F|_X| >= l. Down-compression reduces this to downsets D, where the trace on
X is just D ∩ 2^X. Downsets are generated from their antichains of maximal
elements; bitmaps over 2^[n] make unions and containment counts cheap.
"""

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from src import embedding
from src.core_sets import (
    EXACT_CANONICAL_MAX_N,
    Family,
    canonical_form,
    complement_family,
    popcount,
    check_n,
)
from src.errors import BudgetExhausted, CapabilityError, UsageError
from src.logger import Logger
from src.models import ArrowResult, ExtremalResult, SearchBudget
from src.posets import Poset, dual, poset_id

DOWNSET_FULL_MAX_N = 6
DOWNSET_FILTERED_MAX_N = 7
METHODS = ("antichain", "levels")

SizeFilter = Union[None, int, Tuple[int, int]]


@lru_cache(maxsize=16)
def down_bitmaps(n: int) -> Tuple[int, ...]:
    """down[m]: bitmap over 2^[n] of all subsets of m."""
    down = [0] * (1 << n)
    for m in range(1 << n):
        bitmap = 1 << m
        rest = m
        while rest:
            low = rest & -rest
            bitmap |= down[m ^ low]
            rest ^= low
        down[m] = bitmap
    return tuple(down)


def bitmap_members(bitmap: int) -> Tuple[int, ...]:
    """
    Decode a bitmap over 2^[n] into its member masks

    Args:
        bitmap: Integer whose bit m marks the set with mask m

    Returns:
        Member masks in increasing order

    Example:
        >>> bitmap_members(0b100101)
        (0, 2, 5)
    """
    out = []
    while bitmap:
        low = bitmap & -bitmap
        out.append(low.bit_length() - 1)
        bitmap ^= low
    return tuple(out)


def _size_bounds(size_filter: SizeFilter, n: int) -> Tuple[int, int]:
    if size_filter is None:
        return 0, 1 << n
    if isinstance(size_filter, int):
        return size_filter, size_filter
    low, high = size_filter
    return low, high


def _check_envelope(n: int, size_filter: SizeFilter) -> None:
    check_n(n)
    if n > DOWNSET_FILTERED_MAX_N:
        raise CapabilityError(f"downset enumeration is supported for n <= {DOWNSET_FILTERED_MAX_N}")
    if n == DOWNSET_FILTERED_MAX_N and size_filter is None:
        raise CapabilityError(f"downset enumeration at n = {n} needs a size filter")


def _antichain_bitmaps(n: int, low: int, high: int) -> Iterator[int]:
    down = down_bitmaps(n)
    universe = 1 << n

    def grow(start: int, antichain: int, downset: int) -> Iterator[int]:
        size = popcount(downset)
        if low <= size <= high:
            yield downset
        for m in range(start, universe):
            # m exceeds every antichain member numerically, so only m ⊋ a can clash.
            if down[m] & antichain:
                continue
            grown = downset | down[m]
            if popcount(grown) > high:
                continue
            yield from grow(m + 1, antichain | 1 << m, grown)

    yield from grow(0, 0, 0)


def _level_bitmaps(n: int, low: int, high: int) -> Iterator[int]:
    order = sorted(range(1 << n), key=lambda m: (popcount(m), m))

    def decide(i: int, included: int, size: int) -> Iterator[int]:
        if size > high:
            return
        if i == len(order):
            if size >= low:
                yield included
            return
        m = order[i]
        yield from decide(i + 1, included, size)
        rest = m
        while rest:
            sub_bit = rest & -rest
            if not included >> (m ^ sub_bit) & 1:
                return
            rest ^= sub_bit
        yield from decide(i + 1, included | 1 << m, size + 1)

    yield from decide(0, 0, 0)


def enumerate_downsets(n: int, size_filter: SizeFilter = None, up_to_symmetry: bool = False,
                       method: str = "antichain") -> Iterator[Family]:
    """
    Every downward-closed family of 2^[n] whose size passes the filter (an exact
    size or an inclusive (low, high) pair), once each, or once per S_n orbit.

    Raises:
        CapabilityError: Beyond n = 6 unfiltered or n = 7 filtered
    """
    _check_envelope(n, size_filter)
    if method not in METHODS:
        raise UsageError(f"method must be one of {METHODS}, got {method!r}")
    low, high = _size_bounds(size_filter, n)
    source = _antichain_bitmaps if method == "antichain" else _level_bitmaps
    for bitmap in source(n, low, high):
        fam = Family(n, bitmap_members(bitmap))
        if up_to_symmetry and canonical_form(fam) != fam:
            continue
        yield fam


def count_downsets(n: int, size_filter: SizeFilter = None, method: str = "antichain") -> int:
    """Number of downsets, counted on bitmaps without building families."""
    _check_envelope(n, size_filter)
    if method not in METHODS:
        raise UsageError(f"method must be one of {METHODS}, got {method!r}")
    low, high = _size_bounds(size_filter, n)
    source = _antichain_bitmaps if method == "antichain" else _level_bitmaps
    return sum(1 for _ in source(n, low, high))


def _initial_downset(n: int, m: int) -> Family:
    # All smaller levels, then the first sets of the next level.
    order = sorted(range(1 << n), key=lambda b: (popcount(b), b))
    fam = Family.of(n, order[:m])
    return canonical_form(fam) if n <= EXACT_CANONICAL_MAX_N else fam


def _good_sets(n: int, k: int) -> List[int]:
    down = down_bitmaps(n)
    return [down[X] for X in embedding.subsets_of_size(n, k)]


def arrow(n: int, m: int, k: int, l: int, budget: Optional[SearchBudget] = None,
          method: str = "auto", logger: Optional[Logger] = None) -> ArrowResult:
    """
    Decide (n,m) -> (k,l). On failure the counterexample is the
    lexicographically smallest canonical downset of size m with no k-set X
    holding l of its members.

    Raises:
        UsageError: For negative parameters
        CapabilityError: If enumeration would be needed beyond n = 7
        BudgetExhausted: If the time limit runs out during enumeration
    """
    check_n(n)
    if m < 0 or k < 0 or l < 0:
        raise UsageError(f"arrow parameters must be non-negative, got m={m}, k={k}, l={l}")
    if method not in ("auto", "enumeration"):
        raise UsageError(f"method must be 'auto' or 'enumeration', got {method!r}")

    if m > 1 << n:
        return ArrowResult(n, m, k, l, True, None, "vacuous")
    if k > n or l > 1 << k:
        return ArrowResult(n, m, k, l, False, _initial_downset(n, m), "vacuous")
    if l == 0:
        return ArrowResult(n, m, k, l, True, None, "vacuous")

    below = sum(math.comb(n, i) for i in range(k))
    if method == "auto" and l == 1 << k:
        if m > below:
            return ArrowResult(n, m, k, l, True, None, "shattering")
        return ArrowResult(n, m, k, l, False, _initial_downset(n, m), "shattering")

    if n > DOWNSET_FILTERED_MAX_N:
        raise CapabilityError(f"arrow enumeration is supported for n <= {DOWNSET_FILTERED_MAX_N}")
    budget = budget or SearchBudget()
    deadline = time.monotonic() + budget.time_limit
    goods = _good_sets(n, k)
    down = down_bitmaps(n)
    universe = 1 << n
    counterexamples: List[int] = []
    stats = {"nodes": 0, "checked": 0}

    def is_good(downset: int) -> bool:
        return any(popcount(downset & g) >= l for g in goods)

    def grow(start: int, antichain: int, downset: int) -> None:
        stats["nodes"] += 1
        if stats["nodes"] & 4095 == 0 and time.monotonic() > deadline:
            raise BudgetExhausted(f"arrow ({n},{m}) -> ({k},{l}) ran out of time", partial=stats)
        # Every downset below this node contains it, so a good set stays good.
        if is_good(downset):
            return
        size = popcount(downset)
        if size == m:
            stats["checked"] += 1
            counterexamples.append(downset)
            return
        for x in range(start, universe):
            if down[x] & antichain:
                continue
            grown = downset | down[x]
            if popcount(grown) > m:
                continue
            grow(x + 1, antichain | 1 << x, grown)

    grow(0, 0, 0)
    if logger is not None:
        logger.debug("Arrow enumeration finished", n=n, m=m, k=k, l=l, nodes=stats["nodes"],
                     counterexamples=len(counterexamples))
    if not counterexamples:
        return ArrowResult(n, m, k, l, True, None, "enumeration", downsets_checked=stats["nodes"])
    forms = [canonical_form(Family(n, bitmap_members(b))) for b in counterexamples]
    smallest = min(forms, key=lambda f: f.members)
    return ArrowResult(n, m, k, l, False, smallest, "enumeration", downsets_checked=stats["nodes"])


def sauer_arrow_suite(n: int, k: int, cross_check_max_n: int = 5) -> bool:
    """
    (n, 1 + Σ_{i<k} C(n,i)) -> (k, 2^k) holds and fails one member earlier.
    Up to cross_check_max_n the shattering shortcut is re-derived by enumeration.
    """
    if k < 0 or k > n:
        raise UsageError(f"k must be in 0..{n}, got {k}")
    threshold = sum(math.comb(n, i) for i in range(k))
    ok = arrow(n, threshold + 1, k, 1 << k).holds
    if threshold >= 1:
        ok = ok and not arrow(n, threshold, k, 1 << k).holds
    if ok and n <= cross_check_max_n:
        ok = arrow(n, threshold + 1, k, 1 << k, method="enumeration").holds
        if threshold >= 1:
            ok = ok and not arrow(n, threshold, k, 1 << k, method="enumeration").holds
    return ok


@dataclass
class ArrowBoundReport:
    """
    Upper bound on Tr(n,P) from the arrow relation: value = m - 1 for the
    smallest m with (n,m) -> (k, cap_k + 1) for some k.
    """
    n: int
    poset: str
    use: str
    caps: Dict[int, int]
    value: int
    m: int
    k: int
    arrows: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "poset": self.poset,
            "use": self.use,
            "caps": self.caps,
            "value": self.value,
            "m": self.m,
            "k": self.k,
            "arrows": self.arrows,
        }


def arrow_upper_bound(n: int, P: Poset, ks: Sequence[int], use: str = "tr",
                      caps: Optional[Dict[int, int]] = None, budget: Optional[SearchBudget] = None,
                      logger: Optional[Logger] = None) -> ArrowBoundReport:
    """
    Smallest m such that some k in ks has (n,m) -> (k, cap_k + 1), minus one.
    Caps are Tr(k,P) (use="tr") or La(k,P) (use="la", weaker since Tr <= La);
    missing caps are solved exactly.

    Raises:
        UsageError: If a cap could not be certified
    """
    from src.search import ExtremalSearch

    if use not in ("tr", "la"):
        raise UsageError(f"use must be 'tr' or 'la', got {use!r}")
    caps = dict(caps or {})
    search = ExtremalSearch(budget, logger)
    for k in ks:
        if k in caps:
            continue
        result = search.solve_tr(k, P) if use == "tr" else search.solve_la(k, P)
        if not result.is_exact:
            raise UsageError(f"{use}({k}) for {P.label()} could not be certified")
        caps[k] = result.value

    arrows: List[Dict[str, Any]] = []

    def holds_at(m: int) -> Optional[int]:
        for k in sorted(caps):
            result = arrow(n, m, k, caps[k] + 1, budget=budget, logger=logger)
            arrows.append({"m": m, "k": k, "l": caps[k] + 1, "holds": result.holds})
            if result.holds:
                return k
        return None

    # The relation is monotone in m, so binary search the threshold.
    low, high = 1, (1 << n) + 1
    witness_k = holds_at(high)
    while low < high:
        mid = (low + high) // 2
        k = holds_at(mid)
        if k is not None:
            high, witness_k = mid, k
        else:
            low = mid + 1
    return ArrowBoundReport(n, P.label(), use, caps, value=high - 1, m=high, k=witness_k, arrows=arrows)


def solve_la_closed(n: int, P: Poset, direction: str) -> ExtremalResult:
    """
    La_D(n,P) (direction "down") or La_U(n,P) ("up") by growing downsets from
    their maximal antichains and cutting every branch that already holds P.
    The up-closed value is the down-closed value of the dual poset, complemented.

    Raises:
        CapabilityError: Beyond n = 6
    """
    if direction not in ("down", "up"):
        raise UsageError(f"direction must be 'down' or 'up', got {direction!r}")
    check_n(n)
    if n > DOWNSET_FULL_MAX_N:
        raise CapabilityError(f"closed-family solves are supported for n <= {DOWNSET_FULL_MAX_N}")
    started = time.monotonic()
    target = P if direction == "down" else dual(P)
    down = down_bitmaps(n)
    universe = 1 << n
    best = {"size": 0, "bitmap": 0, "nodes": 0}

    def grow(start: int, antichain: int, downset: int) -> None:
        best["nodes"] += 1
        size = popcount(downset)
        if size > best["size"]:
            best["size"], best["bitmap"] = size, downset
        for x in range(start, universe):
            if down[x] & antichain:
                continue
            grown = downset | down[x]
            if embedding.contains_copy(bitmap_members(grown), target):
                continue
            grow(x + 1, antichain | 1 << x, grown)

    grow(0, 0, 0)
    witness = Family(n, bitmap_members(best["bitmap"]))
    if direction == "up":
        witness = complement_family(witness)
    return ExtremalResult(
        kind="la_d" if direction == "down" else "la_u", n=n, poset_id=poset_id(P),
        poset_label=P.label(), value=best["size"], status="exact", witness=witness,
        nodes=best["nodes"], bounds={"method": "downset_enumeration"},
        elapsed=time.monotonic() - started,
    )
