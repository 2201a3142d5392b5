"""
Ground-set and set-family algebra.

Subsets of [n] = {1, ..., n} are n-bit integers: bit j is set iff element j+1
belongs to the subset. A Family is an immutable, strictly increasing tuple of
such masks over one ground set. Every operator returns a new Family.
"""

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import SchemaError, UsageError

MAX_N = 30
# Exhaustive S_n minimisation is used up to this ground-set size.
EXACT_CANONICAL_MAX_N = 8


def popcount(bits: int) -> int:
    """Number of elements in a mask."""
    return bin(bits).count("1")


def mask_from_elements(elements: Iterable[int]) -> int:
    """Mask of a set of 1-based elements."""
    bits = 0
    for element in elements:
        if element < 1:
            raise UsageError(f"elements are 1-based, got {element}")
        bits |= 1 << (element - 1)
    return bits


def mask_elements(bits: int) -> Tuple[int, ...]:
    """Sorted 1-based elements of a mask."""
    out = []
    j = 0
    while bits:
        if bits & 1:
            out.append(j + 1)
        bits >>= 1
        j += 1
    return tuple(out)


def check_n(n: int) -> None:
    """
    Validate a ground-set size

    Args:
        n: Proposed size of [n]

    Raises:
        UsageError: If n is not an integer in 1..MAX_N
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1 or n > MAX_N:
        raise UsageError(f"ground-set size must be an integer in 1..{MAX_N}, got {n!r}")


@dataclass(frozen=True)
class GroundSet:
    """The ground set [n], 1 <= n <= 30."""
    n: int

    def __post_init__(self) -> None:
        check_n(self.n)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def subset(self, elements: Iterable[int]) -> 'SubsetMask':
        return SubsetMask.from_elements(self.n, elements)


@dataclass(frozen=True, order=True)
class SubsetMask:
    """A subset of [n] with its owning ground-set size."""
    bits: int
    n: int

    def __post_init__(self) -> None:
        check_n(self.n)
        if self.bits < 0 or self.bits >> self.n:
            raise UsageError(f"mask {self.bits:#x} does not fit the ground set [{self.n}]")

    @classmethod
    def from_elements(cls, n: int, elements: Iterable[int]) -> 'SubsetMask':
        elements = list(elements)
        if any(e > n for e in elements):
            raise UsageError(f"elements {elements} exceed the ground set [{n}]")
        return cls(mask_from_elements(elements), n)

    @classmethod
    def full(cls, n: int) -> 'SubsetMask':
        return cls((1 << n) - 1, n)

    def elements(self) -> Tuple[int, ...]:
        return mask_elements(self.bits)

    def __len__(self) -> int:
        return popcount(self.bits)


@dataclass(frozen=True)
class Family:
    """
    A duplicate-free family of subsets of [n].

    Attributes:
        n: Ground-set size
        members: Strictly increasing tuple of masks
    """
    n: int
    members: Tuple[int, ...]

    def __post_init__(self) -> None:
        check_n(self.n)
        limit = 1 << self.n
        previous = -1
        for bits in self.members:
            if bits <= previous:
                raise UsageError("family members must be strictly increasing")
            if bits >= limit:
                raise UsageError(f"member {bits:#x} does not fit the ground set [{self.n}]")
            previous = bits

    @classmethod
    def of(cls, n: int, masks: Iterable[int]) -> 'Family':
        """Family from masks in any order, duplicates collapsed."""
        return cls(n, tuple(sorted(set(masks))))

    @classmethod
    def from_sets(cls, n: int, sets: Iterable[Iterable[int]]) -> 'Family':
        """Family from 1-based element lists."""
        masks = []
        for s in sets:
            s = list(s)
            if any(e > n for e in s):
                raise UsageError(f"set {s} exceeds the ground set [{n}]")
            masks.append(mask_from_elements(s))
        return cls.of(n, masks)

    @classmethod
    def empty(cls, n: int) -> 'Family':
        return cls(n, ())

    @cached_property
    def member_set(self) -> frozenset:
        return frozenset(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, bits: object) -> bool:
        if isinstance(bits, SubsetMask):
            bits = bits.bits
        return bits in self.member_set

    def subsets(self) -> Iterator[SubsetMask]:
        for bits in self.members:
            yield SubsetMask(bits, self.n)

    def sets(self) -> List[List[int]]:
        return [list(mask_elements(bits)) for bits in self.members]

    def with_member(self, bits: int) -> 'Family':
        return Family.of(self.n, self.members + (bits,))

    def without_member(self, bits: int) -> 'Family':
        return Family(self.n, tuple(m for m in self.members if m != bits))

    def to_json(self) -> Dict[str, Any]:
        return {"n": self.n, "sets": self.sets()}

    def to_json_masks(self) -> Dict[str, Any]:
        return {"n": self.n, "masks": [hex(bits) for bits in self.members]}

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> 'Family':
        """
        Parse either {"n": int, "sets": [[ints]]} or {"n": int, "masks": [hex strings]}.

        Raises:
            SchemaError: If the document matches neither form
        """
        if not isinstance(doc, dict) or "n" not in doc:
            raise SchemaError("family document needs an 'n' field")
        n = doc["n"]
        if not isinstance(n, int):
            raise SchemaError("family 'n' must be an integer")
        try:
            if "sets" in doc:
                return cls.from_sets(n, doc["sets"])
            if "masks" in doc:
                return cls.of(n, (int(h, 16) for h in doc["masks"]))
        except (TypeError, ValueError) as e:
            raise SchemaError(f"malformed family document: {e}")
        raise SchemaError("family document needs 'sets' or 'masks'")


def _mask_arg(X: Union[SubsetMask, int], n: int) -> int:
    if isinstance(X, SubsetMask):
        if X.n != n:
            raise UsageError(f"ground sets differ: [{X.n}] versus [{n}]")
        return X.bits
    if X < 0 or X >> n:
        raise UsageError(f"mask {X:#x} does not fit the ground set [{n}]")
    return X


def trace_set(F: SubsetMask, X: SubsetMask) -> SubsetMask:
    """
    Trace of one set on another, F|_X = F ∩ X

    Args:
        F: Set to trace
        X: Set traced on, over the same ground set

    Returns:
        F ∩ X

    Raises:
        UsageError: If the ground sets differ
    """
    if F.n != X.n:
        raise UsageError(f"ground sets differ: [{F.n}] versus [{X.n}]")
    return SubsetMask(F.bits & X.bits, F.n)


def trace_family(fam: Family, X: Union[SubsetMask, int]) -> Family:
    """
    The trace family fam|_X = {F ∩ X : F ∈ fam}, duplicates collapsed

    Args:
        fam: Family over [n]
        X: Set traced on, as a SubsetMask or a raw mask

    Returns:
        The trace family, still over [n]
    """
    x = _mask_arg(X, fam.n)
    return Family.of(fam.n, (bits & x for bits in fam.members))


def down_compress(fam: Family, i: int) -> Family:
    """
    The down-compression D_i: each member F is replaced by F \\ {i} unless
    F \\ {i} is already a member.
    """
    if i < 1 or i > fam.n:
        raise UsageError(f"element {i} is outside [{fam.n}]")
    bit = 1 << (i - 1)
    present = fam.member_set
    out = []
    for bits in fam.members:
        if bits & bit and (bits ^ bit) not in present:
            out.append(bits ^ bit)
        else:
            out.append(bits)
    return Family.of(fam.n, out)


def compress_to_downset(fam: Family) -> Family:
    """Apply D_1, ..., D_n cyclically until nothing changes."""
    current = fam
    while True:
        changed = False
        for i in range(1, fam.n + 1):
            nxt = down_compress(current, i)
            if nxt != current:
                current = nxt
                changed = True
        if not changed:
            return current


def is_downward_closed(fam: Family) -> bool:
    """
    Check that every member of fam has all its subsets in fam

    Only the sets one element smaller are looked up; closure under those
    gives closure under all subsets.

    Args:
        fam: Family to check

    Returns:
        True if fam is a downset
    """
    present = fam.member_set
    for bits in fam.members:
        rest = bits
        while rest:
            low = rest & -rest
            if (bits ^ low) not in present:
                return False
            rest ^= low
    return True


def is_upward_closed(fam: Family) -> bool:
    """Dual of is_downward_closed: every superset in [n] of a member is a member."""
    present = fam.member_set
    full = (1 << fam.n) - 1
    for bits in fam.members:
        missing = full & ~bits
        while missing:
            low = missing & -missing
            if (bits | low) not in present:
                return False
            missing ^= low
    return True


def closure_down(fam: Family) -> Family:
    """Smallest downward-closed family containing fam."""
    seen = set(fam.members)
    stack = list(fam.members)
    while stack:
        bits = stack.pop()
        rest = bits
        while rest:
            low = rest & -rest
            sub = bits ^ low
            if sub not in seen:
                seen.add(sub)
                stack.append(sub)
            rest ^= low
    return Family.of(fam.n, seen)


def closure_up(fam: Family) -> Family:
    """Smallest upward-closed family containing fam."""
    return complement_family(closure_down(complement_family(fam)))


def shadow(fam: Family) -> Family:
    """All sets F \\ {x} with x ∈ F ∈ fam."""
    out = set()
    for bits in fam.members:
        rest = bits
        while rest:
            low = rest & -rest
            out.add(bits ^ low)
            rest ^= low
    return Family.of(fam.n, out)


def complement_family(fam: Family) -> Family:
    """
    Replace every member F by [n] \\ F

    Args:
        fam: Family over [n]

    Returns:
        The family {[n] \\ F : F ∈ fam}

    Example:
        >>> complement_family(Family.from_sets(3, [[1]])) == Family.from_sets(3, [[2, 3]])
        True
    """
    full = (1 << fam.n) - 1
    return Family.of(fam.n, (full ^ bits for bits in fam.members))


def level_family(n: int, k: int) -> Family:
    """C([n], k)."""
    check_n(n)
    if k < 0 or k > n:
        raise UsageError(f"level {k} is outside 0..{n}")
    return Family(n, tuple(bits for bits in range(1 << n) if popcount(bits) == k))


def levels_between(n: int, low: int, high: int) -> Family:
    """All subsets of [n] with size in low..high (clipped to 0..n)."""
    check_n(n)
    low, high = max(low, 0), min(high, n)
    return Family(n, tuple(bits for bits in range(1 << n) if low <= popcount(bits) <= high))


def levels_at_most(n: int, k: int) -> Family:
    """C([n], <= k)."""
    if k < 0 or k > n:
        raise UsageError(f"level {k} is outside 0..{n}")
    return levels_between(n, 0, k)


def levels_at_least(n: int, k: int) -> Family:
    """C([n], >= k)."""
    if k < 0 or k > n:
        raise UsageError(f"level {k} is outside 0..{n}")
    return levels_between(n, k, n)


def power_set(n: int) -> Family:
    """2^[n], members in increasing mask order."""
    check_n(n)
    return Family(n, tuple(range(1 << n)))


def restrict_to(fam: Family, X: int) -> Family:
    """Members contained in X (equals the trace on X for downsets)."""
    return Family(fam.n, tuple(bits for bits in fam.members if bits & ~X == 0))


def apply_permutation(fam: Family, perm: Sequence[int]) -> Family:
    """
    Relabel the ground set: element index j (0-based) goes to perm[j].

    Raises:
        UsageError: If perm is not a permutation of range(n)
    """
    if sorted(perm) != list(range(fam.n)):
        raise UsageError(f"{list(perm)} is not a permutation of 0..{fam.n - 1}")
    out = []
    for bits in fam.members:
        image = 0
        for j in range(fam.n):
            if bits >> j & 1:
                image |= 1 << perm[j]
        out.append(image)
    return Family.of(fam.n, out)


def action_table(perms: Sequence[Sequence[int]], n: int) -> np.ndarray:
    """table[p, mask] is the image of mask under perms[p] (0-based element maps)."""
    perms = np.array(perms, dtype=np.int64).reshape(-1, n)
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n, dtype=np.int64)) & 1
    weights = np.left_shift(1, perms)
    table = (weights @ bits.T).astype(np.int64)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=4)
def permutation_table(n: int) -> np.ndarray:
    """Action of S_n on masks, rows in itertools.permutations(range(n)) order."""
    if n > EXACT_CANONICAL_MAX_N:
        raise UsageError(f"permutation tables are built only for n <= {EXACT_CANONICAL_MAX_N}")
    return action_table(list(itertools.permutations(range(n))), n)


@lru_cache(maxsize=8)
def dihedral_table(n: int) -> np.ndarray:
    """Action of the rotations and reflections of 0..n-1 on masks."""
    perms = []
    for shift in range(n):
        rotation = [(j + shift) % n for j in range(n)]
        perms.append(rotation)
        perms.append([n - 1 - r for r in rotation])
    return action_table(perms, n)


def _sorted_images(members: Sequence[int], n: int, rank: Optional[np.ndarray],
                   table: Optional[np.ndarray] = None) -> np.ndarray:
    if table is None:
        table = permutation_table(n)
    images = table[:, list(members)]
    if rank is not None:
        images = rank[images]
    images = np.sort(images, axis=1)
    return images


def _lex_min_row(rows: np.ndarray) -> int:
    candidates = np.arange(rows.shape[0])
    for col in range(rows.shape[1]):
        column = rows[candidates, col]
        candidates = candidates[column == column.min()]
        if len(candidates) == 1:
            break
    return int(candidates[0])


def is_lex_min_in_orbit(members: Sequence[int], n: int, rank: Optional[np.ndarray] = None,
                        table: Optional[np.ndarray] = None) -> bool:
    """
    Whether the sorted rank tuple of members is the smallest over its orbit.

    `rank` maps masks to positions in a total order of 2^[n] (numeric order when
    None); `members` need not be sorted. `table` is the action of the group
    (all of S_n when None). Used for orderly generation.
    """
    if not members:
        return True
    target = np.array(sorted(members) if rank is None else sorted(int(rank[m]) for m in members))
    images = _sorted_images(members, n, rank, table)
    differs = images != target
    has_diff = differs.any(axis=1)
    if not has_diff.any():
        return True
    first = differs.argmax(axis=1)
    rows = np.nonzero(has_diff)[0]
    return not bool((images[rows, first[rows]] < target[first[rows]]).any())


def _heuristic_relabel(fam: Family) -> Family:
    # Order elements by degree, then by the sorted sizes of the members holding them.
    keys = []
    for j in range(fam.n):
        holding = [popcount(bits) for bits in fam.members if bits >> j & 1]
        keys.append((-len(holding), tuple(sorted(holding)), j))
    order = [key[2] for key in sorted(keys)]
    perm = [0] * fam.n
    for position, j in enumerate(order):
        perm[j] = position
    return apply_permutation(fam, perm)


def canonical_form_info(fam: Family) -> Tuple[Family, bool]:
    """
    Canonical representative of the S_n orbit of fam plus an exactness flag.

    Exact (lexicographically smallest sorted member tuple over all of S_n) for
    n <= 8; above that a degree-refinement relabeling that is only a heuristic.
    """
    if not fam.members:
        return fam, True
    if fam.n > EXACT_CANONICAL_MAX_N:
        return _heuristic_relabel(fam), False
    images = _sorted_images(fam.members, fam.n, None)
    best = images[_lex_min_row(images)]
    return Family(fam.n, tuple(int(b) for b in best)), True


def canonical_form(fam: Family) -> Family:
    """
    Lexicographically least image of fam under S_n

    Args:
        fam: Family to normalize

    Returns:
        The canonical representative of the orbit of fam; see
        canonical_form_info for the permutation and the exactness flag
    """
    return canonical_form_info(fam)[0]


def orbit_size(fam: Family) -> int:
    """Number of distinct images of fam under S_n (n <= 8)."""
    if not fam.members:
        return 1
    images = _sorted_images(fam.members, fam.n, None)
    return int(np.unique(images, axis=0).shape[0])
