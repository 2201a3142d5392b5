"""
Copies of posets in set families.

A copy of P in a family is an injective map from the elements of P to members
such that p < p' in P forces a strict inclusion. Incomparable elements carry no
constraint, so copies are non-induced. On top of the copy search this module
builds the P-free, l-trace P-free and trace P-free predicates and the
shattering (VC dimension) queries.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

from src.configuration import debug_sweep_enabled
from src.core_sets import Family, SubsetMask, mask_elements, mask_from_elements, popcount
from src.errors import IntegrityError, SchemaError, UsageError

if TYPE_CHECKING:
    from src.posets import Poset


@dataclass(frozen=True)
class EmbeddingWitness:
    """
    A copy of a poset: assignment[i] is the mask of the set poset element i maps to.
    """
    assignment: Tuple[int, ...]
    n: int

    def failures(self, P: 'Poset', fam: Optional[Family] = None) -> List[str]:
        """Reasons the witness is not a copy of P (in fam, when given); empty when valid."""
        out = []
        if len(self.assignment) != P.p:
            return [f"witness maps {len(self.assignment)} elements, poset has {P.p}"]
        if len(set(self.assignment)) != P.p:
            out.append("witness is not injective")
        for (i, j) in sorted(P.relations):
            a, b = self.assignment[i], self.assignment[j]
            if a & ~b or a == b:
                out.append(f"element {i} < {j} but {list(mask_elements(a))} is not a proper subset of {list(mask_elements(b))}")
        if fam is not None:
            for i, bits in enumerate(self.assignment):
                if bits not in fam:
                    out.append(f"set {list(mask_elements(bits))} for element {i} is not a family member")
        return out

    def is_valid(self, P: 'Poset', fam: Optional[Family] = None) -> bool:
        return not self.failures(P, fam)

    def to_json(self) -> Dict[str, Any]:
        return {
            "map": [
                {"poset_elem": i, "set": list(mask_elements(bits))}
                for i, bits in enumerate(self.assignment)
            ]
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any], n: int) -> 'EmbeddingWitness':
        try:
            entries = sorted(doc["map"], key=lambda e: e["poset_elem"])
            if [e["poset_elem"] for e in entries] != list(range(len(entries))):
                raise SchemaError("witness map must list poset elements 0..p-1 once each")
            return cls(tuple(mask_from_elements(e["set"]) for e in entries), n)
        except (KeyError, TypeError) as e:
            raise SchemaError(f"malformed witness document: {e}")


@dataclass(frozen=True)
class TraceViolation:
    """
    A copy of P inside the trace of a family on an l-set L.

    Attributes:
        L: Mask of the offending l-subset
        n: Ground-set size
        witness: Copy of P in trace_family(fam, L)
        preimages: For each poset element, the smallest member whose trace is its set
    """
    L: int
    n: int
    witness: EmbeddingWitness
    preimages: Tuple[int, ...]

    @property
    def l(self) -> int:
        return popcount(self.L)

    def to_json(self) -> Dict[str, Any]:
        doc = self.witness.to_json()
        doc["L"] = list(mask_elements(self.L))
        doc["preimages"] = [list(mask_elements(bits)) for bits in self.preimages]
        return doc

    @classmethod
    def from_json(cls, doc: Dict[str, Any], n: int) -> 'TraceViolation':
        if "L" not in doc:
            raise SchemaError("trace violation needs an 'L' field")
        witness = EmbeddingWitness.from_json(doc, n)
        preimages = tuple(mask_from_elements(s) for s in doc.get("preimages", []))
        return cls(mask_from_elements(doc["L"]), n, witness, preimages)


def replay_violation(fam: Family, P: 'Poset', violation: TraceViolation) -> List[str]:
    """Re-check a TraceViolation against fam; returns failure reasons (empty when it replays)."""
    traces = Family.of(fam.n, (bits & violation.L for bits in fam.members))
    out = violation.witness.failures(P, traces)
    if violation.preimages:
        for i, (pre, image) in enumerate(zip(violation.preimages, violation.witness.assignment)):
            if pre not in fam:
                out.append(f"preimage of element {i} is not a family member")
            elif pre & violation.L != image:
                out.append(f"preimage of element {i} does not trace to its witness set")
    return out


def _containment(members: Sequence[int]) -> Tuple[List[int], List[int]]:
    # Members are sorted, and a proper subset is numerically smaller.
    k = len(members)
    sup = [0] * k
    sub = [0] * k
    for i in range(k):
        a = members[i]
        for j in range(i + 1, k):
            if a & members[j] == a:
                sup[i] |= 1 << j
                sub[j] |= 1 << i
    return sup, sub


def _search(members: Sequence[int], P: 'Poset', forced: Optional[int] = None) -> Optional[Tuple[int, ...]]:
    """
    Backtracking over a linear extension of P. Returns member indices per
    poset element, smallest first in extension order, or None.
    """
    k = len(members)
    if k < P.p:
        return None
    sup, sub = _containment(members)
    up_counts = [popcount(b) for b in sup]
    down_counts = [popcount(b) for b in sub]

    allowed = []
    for q in range(P.p):
        need_down, need_up = len(P.down_sets[q]), len(P.up_sets[q])
        bits = 0
        for i in range(k):
            if down_counts[i] >= need_down and up_counts[i] >= need_up:
                bits |= 1 << i
        if not bits:
            return None
        allowed.append(bits)

    order = P.linear_extension
    covers = P.lower_covers
    image = [-1] * P.p

    def extend(pos: int, used: int, masks: List[int]) -> bool:
        if pos == len(order):
            return True
        q = order[pos]
        cand = masks[q] & ~used
        for c in covers[q]:
            cand &= sup[image[c]]
            if not cand:
                return False
        while cand:
            low = cand & -cand
            image[q] = low.bit_length() - 1
            if extend(pos + 1, used | low, masks):
                return True
            cand ^= low
        image[q] = -1
        return False

    if forced is None:
        return tuple(image) if extend(0, 0, allowed) else None

    forced_bit = 1 << forced
    for q in range(P.p):
        if not allowed[q] & forced_bit:
            continue
        masks = [b & ~forced_bit for b in allowed]
        masks[q] = forced_bit
        if extend(0, 0, masks):
            return tuple(image)
    return None


@lru_cache(maxsize=262144)
def contains_copy(members: Tuple[int, ...], P: 'Poset') -> bool:
    """Memoized copy test on a sorted member tuple."""
    return _search(members, P) is not None


def find_copy(fam: Family, P: 'Poset') -> Optional[EmbeddingWitness]:
    """
    Find an injective order-preserving map of P into fam

    Copies are non-induced: incomparable elements of P may land on
    comparable members.

    Args:
        fam: Family searched
        P: Forbidden poset

    Returns:
        EmbeddingWitness listing the image of each element of P in order,
        or None if fam is P-free
    """
    found = _search(fam.members, P)
    if found is None:
        return None
    return EmbeddingWitness(tuple(fam.members[i] for i in found), fam.n)


def find_copy_using(fam: Family, P: 'Poset', bits: int) -> Optional[EmbeddingWitness]:
    """A copy of P in fam whose image contains the member `bits`."""
    try:
        index = fam.members.index(bits)
    except ValueError:
        raise UsageError(f"{list(mask_elements(bits))} is not a member of the family")
    found = _search(fam.members, P, forced=index)
    if found is None:
        return None
    return EmbeddingWitness(tuple(fam.members[i] for i in found), fam.n)


def is_p_free(fam: Family, P: 'Poset') -> bool:
    """True if fam contains no (weak) copy of P."""
    return _search(fam.members, P) is None


def _check_l(fam: Family, l: int) -> None:
    if l < 1 or l > fam.n:
        raise UsageError(f"trace size l must be in 1..{fam.n}, got {l}")


def subsets_of_size(n: int, l: int):
    """l-subsets of [n] as masks, in lexicographic order of their element lists."""
    for combo in itertools.combinations(range(n), l):
        bits = 0
        for j in combo:
            bits |= 1 << j
        yield bits


def _violation_on(fam: Family, P: 'Poset', L: int) -> Optional[TraceViolation]:
    traces = tuple(sorted({bits & L for bits in fam.members}))
    if len(traces) < P.p or not contains_copy(traces, P):
        return None
    found = _search(traces, P)
    assignment = tuple(traces[i] for i in found)
    preimages = tuple(min(m for m in fam.members if m & L == t) for t in assignment)
    return TraceViolation(L, fam.n, EmbeddingWitness(assignment, fam.n), preimages)


def find_l_trace_violation(fam: Family, P: 'Poset', l: int) -> Optional[TraceViolation]:
    """The lexicographically smallest l-set whose trace contains P, with a copy; None if l-trace P-free."""
    _check_l(fam, l)
    if len(fam) < P.p:
        return None
    for L in subsets_of_size(fam.n, l):
        violation = _violation_on(fam, P, L)
        if violation is not None:
            return violation
    return None


def is_l_trace_p_free(fam: Family, P: 'Poset', l: int) -> bool:
    """
    Check that no l-set X has a trace fam|_X containing P

    Args:
        fam: Family over [n]
        P: Forbidden poset
        l: Trace size, 1 <= l <= n

    Returns:
        True if fam is l-trace P-free

    Raises:
        UsageError: If l is out of range
    """
    return find_l_trace_violation(fam, P, l) is None


def trace_sweep_levels(P: 'Poset', n: int) -> List[int]:
    """
    The trace sizes that decide trace P-freeness over [n], largest first.

    Any |P| distinct sets are told apart by at most |P|-1 ground elements, so a
    copy on a larger trace survives on some (|P|-1)-subset of it. Below
    max(h(P)-1, log2|P|) no trace can hold a copy.
    """
    from src.posets import height

    top = min(n, max(1, P.p - 1))
    low = max(1, height(P) - 1, math.ceil(math.log2(P.p)) if P.p > 1 else 1)
    return list(range(top, low - 1, -1))


def find_trace_violation_naive(fam: Family, P: 'Poset') -> Optional[TraceViolation]:
    """Trace violation found by trying every l from n down to 1; reference for find_trace_violation."""
    for l in range(fam.n, 0, -1):
        violation = find_l_trace_violation(fam, P, l)
        if violation is not None:
            return violation
    return None


def find_trace_violation(fam: Family, P: 'Poset') -> Optional[TraceViolation]:
    """
    A trace of fam containing P, or None when fam is trace P-free.

    With TRACEPOSET_DEBUG_SWEEP set, the reduced sweep is cross-checked
    against every l in 1..n.
    """
    found = None
    if len(fam) >= P.p:
        for l in trace_sweep_levels(P, fam.n):
            found = find_l_trace_violation(fam, P, l)
            if found is not None:
                break
    if debug_sweep_enabled():
        naive = find_trace_violation_naive(fam, P)
        if (naive is None) != (found is None):
            raise IntegrityError(
                f"reduced trace sweep disagrees with the full sweep for {P.label()} on n={fam.n}"
            )
    return found


def is_trace_p_free(fam: Family, P: 'Poset') -> bool:
    """
    Check that every trace fam|_X, X ⊆ [n], is P-free

    Args:
        fam: Family over [n]
        P: Forbidden poset

    Returns:
        True if fam is trace P-free
    """
    return find_trace_violation(fam, P) is None


def is_trace_p_free_naive(fam: Family, P: 'Poset') -> bool:
    """is_trace_p_free without the reduced sweep."""
    return find_trace_violation_naive(fam, P) is None


def find_shattered_set(fam: Family, k: int) -> Optional[SubsetMask]:
    """A k-set X with fam|_X = 2^X, the lexicographically smallest one, or None."""
    if k < 0 or k > fam.n:
        raise UsageError(f"k must be in 0..{fam.n}, got {k}")
    if len(fam) < 1 << k:
        return None
    target = 1 << k
    for X in subsets_of_size(fam.n, k):
        if len({bits & X for bits in fam.members}) == target:
            return SubsetMask(X, fam.n)
    return None


def vc_dim(fam: Family) -> int:
    """Size of a largest shattered set; -1 for the empty family."""
    if not fam.members:
        return -1
    k = 0
    while k < fam.n and find_shattered_set(fam, k + 1) is not None:
        k += 1
    return k
