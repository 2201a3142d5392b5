"""
Finite posets, the named posets of the trace problems, and the lattice
parameters e(P), x(P), y(P).

A Poset stores its full strict order relation on elements 0..p-1. Named
constructors number elements bottom-up, left to right, so outputs are
deterministic. Structural questions (Hasse diagram, height, isomorphism,
tree test) are answered through networkx.
"""

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from src import embedding
from src.core_sets import level_family, levels_at_most, levels_between, power_set
from src.errors import SchemaError, UncertifiedError, UsageError

# param_y embeds into full cubes; beyond this the check is too expensive.
MAX_CUBE_CAP = 8


@dataclass(frozen=True)
class Poset:
    """
    Finite strict partial order on 0..p-1.

    Attributes:
        p: Number of elements
        relations: All pairs (i, j) with i < j in the order (transitively closed)
        name: Display name, ignored by equality
    """
    p: int
    relations: FrozenSet[Tuple[int, int]]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.p < 1:
            raise UsageError(f"a poset needs at least one element, got {self.p}")
        for (i, j) in self.relations:
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise UsageError(f"relation ({i}, {j}) mentions an element outside 0..{self.p - 1}")
            if i == j:
                raise UsageError(f"relation is not irreflexive at {i}")
            if (j, i) in self.relations:
                raise UsageError(f"relation is not antisymmetric on ({i}, {j})")
        for (i, j) in self.relations:
            for k in self.up_sets[j]:
                if (i, k) not in self.relations:
                    raise UsageError(f"relation is not transitive: {i}<{j}<{k} but not {i}<{k}")

    @classmethod
    def from_relation(cls, p: int, pairs: Iterable[Tuple[int, int]], name: str = "") -> 'Poset':
        """
        Build a poset from any generating set of strict relations; the transitive
        closure is applied before the axioms are checked.

        Raises:
            UsageError: If the pairs contain a cycle or an out-of-range element
        """
        graph = nx.DiGraph()
        graph.add_nodes_from(range(p))
        for (i, j) in pairs:
            if not (0 <= i < p and 0 <= j < p):
                raise UsageError(f"relation ({i}, {j}) mentions an element outside 0..{p - 1}")
            graph.add_edge(i, j)
        if not nx.is_directed_acyclic_graph(graph):
            raise UsageError("relation has a cycle, so it is not a strict partial order")
        closure = nx.transitive_closure_dag(graph)
        return cls(p, frozenset(closure.edges()), name)

    def lt(self, i: int, j: int) -> bool:
        return (i, j) in self.relations

    def comparable(self, i: int, j: int) -> bool:
        return (i, j) in self.relations or (j, i) in self.relations

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.p))
        g.add_edges_from(self.relations)
        return g

    @cached_property
    def hasse_graph(self) -> nx.DiGraph:
        reduced = nx.transitive_reduction(self.graph)
        reduced.add_nodes_from(range(self.p))
        return reduced

    @cached_property
    def up_sets(self) -> Tuple[FrozenSet[int], ...]:
        ups: List[set] = [set() for _ in range(self.p)]
        for (i, j) in self.relations:
            ups[i].add(j)
        return tuple(frozenset(u) for u in ups)

    @cached_property
    def down_sets(self) -> Tuple[FrozenSet[int], ...]:
        downs: List[set] = [set() for _ in range(self.p)]
        for (i, j) in self.relations:
            downs[j].add(i)
        return tuple(frozenset(d) for d in downs)

    @cached_property
    def lower_covers(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(sorted(self.hasse_graph.predecessors(j))) for j in range(self.p))

    @cached_property
    def linear_extension(self) -> Tuple[int, ...]:
        return tuple(nx.lexicographical_topological_sort(self.graph))

    def __len__(self) -> int:
        return self.p

    def label(self) -> str:
        return self.name or f"poset(p={self.p})"

    def to_json(self) -> Dict[str, Any]:
        return {"p": self.p, "lt": sorted([i, j] for (i, j) in self.relations)}


@dataclass(frozen=True)
class HasseDiagram:
    """Cover pairs (i, j): i is covered by j."""
    edges: Tuple[Tuple[int, int], ...]


@dataclass
class ParamReport:
    """
    A lattice parameter certified on a finite envelope.

    Attributes:
        name: "x" or "e"
        value: Value certified on the envelope
        envelope: What was tested (n values, or (j, n) bands)
        stabilized: Whether the value looked stable over the envelope
        detail: Per-n values, or the band that capped the value
    """
    name: str
    value: int
    envelope: List[Any]
    stabilized: bool
    detail: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "envelope": self.envelope,
            "stabilized": self.stabilized,
            "detail": self.detail,
        }


def chain(k: int) -> Poset:
    """The k-chain P_k: 0 < 1 < ... < k-1."""
    if k < 1:
        raise UsageError(f"chain length must be at least 1, got {k}")
    return Poset.from_relation(k, [(i, i + 1) for i in range(k - 1)], name=f"chain({k})")


def k_rs(r: int, s: int) -> Poset:
    """K_{r,s}: r bottoms 0..r-1 below s tops r..r+s-1."""
    if r < 1 or s < 1:
        raise UsageError(f"K_(r,s) needs r, s >= 1, got r={r}, s={s}")
    pairs = [(a, r + b) for a in range(r) for b in range(s)]
    return Poset.from_relation(r + s, pairs, name=f"k_rs({r},{s})")


def vee(s: int) -> Poset:
    """∨_s = K_{1,s}: one bottom below s tops."""
    poset = k_rs(1, s)
    return Poset(poset.p, poset.relations, name=f"vee({s})")


def wedge(r: int) -> Poset:
    """∧_r = K_{r,1}: r bottoms below one top."""
    poset = k_rs(r, 1)
    return Poset(poset.p, poset.relations, name=f"wedge({r})")


def butterfly() -> Poset:
    """B: a, b < c, d."""
    poset = k_rs(2, 2)
    return Poset(poset.p, poset.relations, name="butterfly")


def diamond() -> Poset:
    """D: a < b, c < d."""
    return Poset.from_relation(4, [(0, 1), (0, 2), (1, 3), (2, 3)], name="diamond")


def k_r1s(r: int, s: int) -> Poset:
    """K_{r,1,s}: r bottoms below one middle element below s tops."""
    if r < 1 or s < 1:
        raise UsageError(f"K_(r,1,s) needs r, s >= 1, got r={r}, s={s}")
    middle = r
    pairs = [(a, middle) for a in range(r)] + [(middle, middle + 1 + b) for b in range(s)]
    return Poset.from_relation(r + 1 + s, pairs, name=f"k_r1s({r},{s})")


def p_m_gadget(m: int) -> Poset:
    """
    The gadget P_m: a minimal element a, 2^m + 1 elements b_i above a, and one
    c_j above each pair {b_k, b_l}, the pairs taken in lexicographic order.
    """
    if m < 1:
        raise UsageError(f"gadget parameter must be at least 1, got {m}")
    nb = 2 ** m + 1
    pairs = [(0, 1 + i) for i in range(nb)]
    c = 1 + nb
    for (k, l) in itertools.combinations(range(nb), 2):
        pairs.append((1 + k, c))
        pairs.append((1 + l, c))
        c += 1
    return Poset.from_relation(c, pairs, name=f"p_m_gadget({m})")


def tree_from_hasse(edges: Sequence[Sequence[int]], p: Optional[int] = None) -> Poset:
    """
    Tree poset from its Hasse edges (i, j), i covered by j.

    Raises:
        UsageError: If the edges do not form a tree or are not acyclic covers
    """
    edges = [tuple(e) for e in edges]
    if p is None:
        p = 1 + max((max(e) for e in edges), default=0)
    undirected = nx.Graph()
    undirected.add_nodes_from(range(p))
    undirected.add_edges_from(edges)
    if not nx.is_tree(undirected):
        raise UsageError("Hasse edges do not form a tree")
    return Poset.from_relation(p, edges, name="tree")


_NAMED = {
    "chain": (chain, ("k",)),
    "vee": (vee, ("s",)),
    "wedge": (wedge, ("r",)),
    "butterfly": (butterfly, ()),
    "diamond": (diamond, ()),
    "k_rs": (k_rs, ("r", "s")),
    "k_r1s": (k_r1s, ("r", "s")),
    "p_m_gadget": (p_m_gadget, ("m",)),
    "tree_from_hasse": (tree_from_hasse, ("edges",)),
}


def build_named(name: str, params: Optional[Dict[str, Any]] = None) -> Poset:
    """
    Build one of the named posets.

    Raises:
        UsageError: Unknown name, missing or unexpected parameters
    """
    params = dict(params or {})
    if name not in _NAMED:
        raise UsageError(f"unknown poset {name!r}; known: {', '.join(sorted(_NAMED))}")
    constructor, expected = _NAMED[name]
    if set(params) != set(expected):
        raise UsageError(f"poset {name!r} takes parameters {list(expected)}, got {sorted(params)}")
    return constructor(**params)


def parse_poset(text: str) -> Poset:
    """
    Parse a CLI poset argument: a bare name ("butterfly"), a name with
    parameters ("k_rs:r=2,s=3"), or inline JSON.
    """
    text = text.strip()
    if text.startswith("{"):
        try:
            return poset_from_json(json.loads(text))
        except json.JSONDecodeError as e:
            raise SchemaError(f"poset JSON is malformed: {e}")
    name, _, rest = text.partition(":")
    params: Dict[str, Any] = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            try:
                params[key.strip()] = int(value)
            except ValueError:
                raise UsageError(f"poset parameter {item!r} is not key=int")
    return build_named(name.strip(), params)


def poset_from_json(doc: Dict[str, Any]) -> Poset:
    """
    Parse {"name": ..., "params": {...}} or {"p": int, "lt": [[i, j], ...]}.

    Raises:
        SchemaError: If the document matches neither form
    """
    if not isinstance(doc, dict):
        raise SchemaError("poset document must be an object")
    if "name" in doc:
        return build_named(doc["name"], doc.get("params") or {})
    if "p" in doc and "lt" in doc:
        try:
            return Poset.from_relation(int(doc["p"]), [(int(i), int(j)) for i, j in doc["lt"]])
        except (TypeError, ValueError) as e:
            if isinstance(e, UsageError):
                raise
            raise SchemaError(f"malformed poset relation: {e}")
    raise SchemaError("poset document needs 'name' or both 'p' and 'lt'")


def hasse(P: Poset) -> HasseDiagram:
    return HasseDiagram(tuple(sorted(P.hasse_graph.edges())))


def edge_count(P: Poset) -> int:
    """E(P): number of edges of the Hasse diagram."""
    return P.hasse_graph.number_of_edges()


def height(P: Poset) -> int:
    """h(P): number of elements in a longest chain."""
    return nx.dag_longest_path_length(P.graph) + 1


def dual(P: Poset) -> Poset:
    name = f"dual({P.name})" if P.name else ""
    return Poset(P.p, frozenset((j, i) for (i, j) in P.relations), name=name)


def maximal_elements(P: Poset) -> List[int]:
    return [i for i in range(P.p) if not P.up_sets[i]]


def has_unique_max(P: Poset) -> bool:
    return len(maximal_elements(P)) == 1


def is_tree_poset(P: Poset) -> bool:
    return nx.is_tree(P.hasse_graph.to_undirected())


def is_connected(P: Poset) -> bool:
    return nx.is_weakly_connected(P.graph)


def is_isomorphic(P: Poset, Q: Poset) -> bool:
    if P.p != Q.p or len(P.relations) != len(Q.relations):
        return False
    return nx.is_isomorphic(P.graph, Q.graph)


def _refine(P: Poset, colors: List[int]) -> List[int]:
    """Split color classes by the colors above and below each element until stable."""
    while True:
        signatures = [
            (colors[i], tuple(sorted(colors[j] for j in P.up_sets[i])),
             tuple(sorted(colors[j] for j in P.down_sets[i])))
            for i in range(P.p)
        ]
        rank = {s: k for k, s in enumerate(sorted(set(signatures)))}
        refined = [rank[s] for s in signatures]
        if len(rank) == len(set(colors)):
            return refined
        colors = refined


def _individualize(colors: List[int], v: int) -> List[int]:
    keys = [(c, 0 if i == v else 1) for i, c in enumerate(colors)]
    rank = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [rank[k] for k in keys]


def canonical_relation(P: Poset) -> Tuple[Tuple[int, int], ...]:
    """
    Sorted relation of P under its canonical labeling.

    Individualization-refinement: refine colors by up/down neighbourhoods,
    branch on the first non-singleton class, and keep the lexicographically
    smallest relation over all discrete leaves. Of several twins (elements
    with equal up- and down-sets) in a class only one is branched on, since
    swapping twins is an automorphism.

    Args:
        P: Poset to label

    Returns:
        Tuple of (i, j) pairs, equal for two posets exactly when they are
        isomorphic

    Example:
        >>> canonical_relation(k_rs(2, 2)) == canonical_relation(butterfly())
        True
    """
    best: List[Optional[Tuple[Tuple[int, int], ...]]] = [None]

    def search(colors: List[int]) -> None:
        if len(set(colors)) == P.p:
            code = tuple(sorted((colors[i], colors[j]) for (i, j) in P.relations))
            if best[0] is None or code < best[0]:
                best[0] = code
            return
        sizes: Dict[int, int] = {}
        for c in colors:
            sizes[c] = sizes.get(c, 0) + 1
        target = min(c for c, size in sizes.items() if size > 1)
        seen_twins = set()
        for v in range(P.p):
            if colors[v] != target:
                continue
            twin = (P.down_sets[v], P.up_sets[v])
            if twin in seen_twins:
                continue
            seen_twins.add(twin)
            search(_refine(P, _individualize(colors, v)))

    search(_refine(P, [0] * P.p))
    return best[0]


def poset_id(P: Poset) -> str:
    """
    Catalog key of P: sha256 of its size and canonical relation, truncated
    to 16 hex digits. Isomorphic posets share an id and non-isomorphic ones
    differ (up to hash collisions).

    Example:
        >>> poset_id(k_rs(2, 2)) == poset_id(butterfly())
        True
    """
    doc = json.dumps([P.p, [list(pair) for pair in canonical_relation(P)]], separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def induced(P: Poset, elements: Sequence[int], name: str = "") -> Poset:
    """Subposet induced on `elements`, renumbered in the given order."""
    index = {e: k for k, e in enumerate(elements)}
    pairs = [(index[i], index[j]) for (i, j) in P.relations if i in index and j in index]
    return Poset(len(elements), frozenset(pairs), name=name)


def _require_rooted_tree(T: Poset) -> int:
    if not is_tree_poset(T):
        raise UsageError(f"{T.label()} is not a tree poset")
    tops = maximal_elements(T)
    if len(tops) != 1:
        raise UsageError(f"{T.label()} has no unique maximum element")
    return tops[0]


def t_power(T: Poset, k: int) -> Poset:
    """
    T^k: the maximum of the tree poset T replaced by an antichain of k elements,
    each above every other element of T.
    """
    if k < 1:
        raise UsageError(f"antichain size must be at least 1, got {k}")
    top = _require_rooted_tree(T)
    rest = [e for e in range(T.p) if e != top]
    base = induced(T, rest)
    q = len(rest)
    pairs = set(base.relations)
    for t in range(q):
        for i in range(k):
            pairs.add((t, q + i))
    name = f"t_power({T.name},{k})" if T.name else ""
    return Poset(q + k, frozenset(pairs), name=name)


def _children_subtrees(T: Poset, top: int) -> List[List[int]]:
    subtrees = []
    for child in sorted(T.hasse_graph.predecessors(top)):
        below = sorted(T.down_sets[child] | {child})
        subtrees.append(below)
    return subtrees


def t_otimes(T: Poset, r: int) -> Poset:
    """
    T^{⊗r}: recursive blow-up of a tree poset with a unique maximum; the top of
    the result has c·r children, r copies of T_j^{⊗r} for each child subtree T_j.
    """
    if r < 1:
        raise UsageError(f"blow-up factor must be at least 1, got {r}")
    top = _require_rooted_tree(T)
    if T.p == 1:
        return Poset(1, frozenset(), name=f"t_otimes({T.name},{r})" if T.name else "")

    pairs: List[Tuple[int, int]] = []
    offset = 0
    for subtree in _children_subtrees(T, top):
        blown = t_otimes(induced(T, subtree), r)
        for _ in range(r):
            pairs.extend((offset + i, offset + j) for (i, j) in blown.relations)
            offset += blown.p
    new_top = offset
    pairs.extend((e, new_top) for e in range(offset))
    name = f"t_otimes({T.name},{r})" if T.name else ""
    return Poset(offset + 1, frozenset(pairs), name=name)


def t_otimes_size(T: Poset, r: int) -> int:
    """Element count of T^{⊗r} by the size recursion alone."""
    top = _require_rooted_tree(T)
    if T.p == 1:
        return 1
    return 1 + r * sum(t_otimes_size(induced(T, sub), r) for sub in _children_subtrees(T, top))


def param_y(P: Poset, cap: int = MAX_CUBE_CAP) -> int:
    """
    y(P): the largest m <= cap such that 2^[m] is P-free.

    Raises:
        UsageError: If cap exceeds MAX_CUBE_CAP
        UncertifiedError: If 2^[cap] is still P-free (lower_bound = cap)
    """
    if cap < 1 or cap > MAX_CUBE_CAP:
        raise UsageError(f"cube cap must be in 1..{MAX_CUBE_CAP}, got {cap}")
    # 2^[0] = {∅} holds a copy only of the one-element poset
    if P.p == 1:
        return -1
    best = 0
    for m in range(1, cap + 1):
        if not embedding.is_p_free(power_set(m), P):
            return best
        best = m
    raise UncertifiedError(f"2^[{cap}] is still {P.label()}-free; y is at least {cap}", lower_bound=cap)


def param_x(P: Poset, n: int) -> int:
    """x(n,P): the largest x with C([n], <= x) P-free (-1 if even {∅} holds a copy)."""
    if P.p == 1:
        return -1
    x = -1
    for level in range(0, n + 1):
        if not embedding.is_p_free(levels_at_most(n, level), P):
            break
        x = level
    return x


def param_x_limit(P: Poset, n_range: Iterable[int]) -> ParamReport:
    """
    x(P) as the value of x(n,P) at the largest tested n. Stabilized when the
    last two tested n agree and the sequence never increased.
    """
    ns = sorted(set(n_range))
    if not ns:
        raise UsageError("n_range is empty")
    values = {n: param_x(P, n) for n in ns}
    sequence = [values[n] for n in ns]
    monotone = all(a >= b for a, b in zip(sequence, sequence[1:]))
    stable = len(ns) >= 2 and sequence[-1] == sequence[-2] and monotone
    first_stable = ns[-1]
    for n in reversed(ns):
        if values[n] != sequence[-1]:
            break
        first_stable = n
    return ParamReport(
        name="x",
        value=sequence[-1],
        envelope=ns,
        stabilized=stable,
        detail={"by_n": values, "monotone": monotone, "stable_from": first_stable},
    )


def param_e(P: Poset, j_range: Iterable[int], n_range: Iterable[int]) -> ParamReport:
    """
    e(P) certified on a finite envelope: the largest k such that every tested
    band C([n], j+1) ∪ ... ∪ C([n], j+k) that fits inside 2^[n] is P-free.

    Raises:
        UncertifiedError: If every tested band of every width that fits is P-free
    """
    js = sorted(set(j_range))
    ns = sorted(set(n_range))
    if not js or not ns:
        raise UsageError("j_range and n_range must be non-empty")
    max_width = max(ns) + 1
    tested: List[Tuple[int, int, int]] = []
    for k in range(1, max_width + 1):
        bands = [(j, n) for n in ns for j in js if j >= -1 and j + k <= n]
        if not bands:
            break
        for (j, n) in bands:
            tested.append((j, n, k))
            band = levels_between(n, j + 1, j + k)
            if not embedding.is_p_free(band, P):
                return ParamReport(
                    name="e",
                    value=k - 1,
                    envelope=[list(t) for t in tested],
                    stabilized=True,
                    detail={"capping_band": {"j": j, "n": n, "k": k}},
                )
    raise UncertifiedError(
        f"every tested band is {P.label()}-free; e is not certified on this envelope",
        lower_bound=max((t[2] for t in tested), default=0),
    )


def sperner_value(n: int, k: int) -> int:
    """Sum of the k largest binomial coefficients of order n (La(n, P_{k+1}))."""
    coefficients = sorted((math.comb(n, i) for i in range(n + 1)), reverse=True)
    return sum(coefficients[:k])
