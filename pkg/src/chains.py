"""
Chain machinery for the butterfly, diamond and ∨_s arguments.

Symmetric chain decompositions of 2^[n], the Lubell function, Mirsky
extraction of antichains, and the labeled chain graphs G_C together with the
4-cycle label condition they satisfy when the family is (n-2)-trace
diamond-free.
"""

import itertools
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from src import embedding
from src.core_sets import Family, mask_elements, popcount, shadow, check_n
from src.errors import UsageError
from src.logger import Logger
from src.posets import diamond


@dataclass(frozen=True)
class ChainDecomposition:
    """
    A partition of 2^[n] into chains, each strictly nested and listed bottom-up.
    """
    n: int
    chains: Tuple[Tuple[int, ...], ...]

    @cached_property
    def chain_of(self) -> Dict[int, int]:
        return {bits: c for c, chain in enumerate(self.chains) for bits in chain}

    def failures(self) -> List[str]:
        """Violated decomposition invariants; empty for a valid symmetric decomposition."""
        out = []
        seen = Counter(bits for chain in self.chains for bits in chain)
        if set(seen) != set(range(1 << self.n)) or any(v > 1 for v in seen.values()):
            out.append("chains do not partition 2^[n]")
        if len(self.chains) != math.comb(self.n, self.n // 2):
            out.append(f"expected {math.comb(self.n, self.n // 2)} chains, got {len(self.chains)}")
        for c, chain in enumerate(self.chains):
            for a, b in zip(chain, chain[1:]):
                if a & ~b or popcount(b) != popcount(a) + 1:
                    out.append(f"chain {c} is not saturated at {list(mask_elements(a))}")
                    break
            if popcount(chain[0]) + popcount(chain[-1]) != self.n:
                out.append(f"chain {c} is not symmetric")
        return out

    def to_json(self) -> Dict[str, Any]:
        return {"n": self.n, "chains": [[list(mask_elements(b)) for b in chain] for chain in self.chains]}


def _unpaired_zeros(bits: int, n: int) -> Optional[List[int]]:
    # Bracket matching: a 0 opens, a 1 closes the nearest open 0 on its left.
    open_zeros: List[int] = []
    for j in range(n):
        if bits >> j & 1:
            if not open_zeros:
                return None
            open_zeros.pop()
        else:
            open_zeros.append(j)
    return open_zeros


def symmetric_chain_decomposition(n: int) -> ChainDecomposition:
    """
    The bracketing decomposition: each chain starts at a set without unmatched
    1s and grows by switching its unmatched 0s on, left to right.
    """
    check_n(n)
    chains = []
    for start in range(1 << n):
        free = _unpaired_zeros(start, n)
        if free is None:
            continue
        chain = [start]
        bits = start
        for j in free:
            bits |= 1 << j
            chain.append(bits)
        chains.append(tuple(chain))
    return ChainDecomposition(n, tuple(chains))


def lubell(fam: Family) -> Fraction:
    """λ(F) = Σ 1 / C(n, |F|), exact."""
    return sum((Fraction(1, math.comb(fam.n, popcount(bits))) for bits in fam.members), Fraction(0))


def is_antichain(fam: Family) -> bool:
    members = fam.members
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if a & b == a:
                return False
    return True


def lym_check(fam: Family) -> bool:
    """For an antichain, λ ≤ 1; families with comparable members pass vacuously."""
    if not is_antichain(fam):
        return True
    return lubell(fam) <= 1


def _heights(fam: Family) -> Tuple[List[int], List[int]]:
    members = fam.members
    height = [1] * len(members)
    below = [-1] * len(members)
    for i, b in enumerate(members):
        for j in range(i):
            a = members[j]
            if a & b == a and height[j] + 1 > height[i]:
                height[i] = height[j] + 1
                below[i] = j
    return height, below


def longest_chain(fam: Family) -> Tuple[int, ...]:
    """A longest chain of members, bottom-up."""
    if not fam.members:
        return ()
    height, below = _heights(fam)
    i = max(range(len(height)), key=lambda k: (height[k], -k))
    out = []
    while i >= 0:
        out.append(fam.members[i])
        i = below[i]
    return tuple(reversed(out))


def mirsky_antichain(fam: Family, s: int) -> Family:
    """
    The largest height class of a family with no chain of s+1 members; it is
    an antichain of size at least ceil(|F|/s).

    Raises:
        UsageError: If the family holds an (s+1)-chain (the chain is named)
    """
    if s < 1:
        raise UsageError(f"s must be at least 1, got {s}")
    if not fam.members:
        return fam
    height, _ = _heights(fam)
    if max(height) > s:
        chain = longest_chain(fam)[: s + 1]
        raise UsageError(
            f"family contains an {s + 1}-chain: {[list(mask_elements(b)) for b in chain]}"
        )
    classes: Dict[int, List[int]] = {}
    for bits, h in zip(fam.members, height):
        classes.setdefault(h, []).append(bits)
    best = max(sorted(classes), key=lambda h: len(classes[h]))
    return Family(fam.n, tuple(classes[best]))


@dataclass
class LabeledChainGraph:
    """
    Chain graph of one chain: vertices 1..n, an edge e whenever C ∪ e is a
    member for some chain set C disjoint from e. Edge attributes: "label" (the
    smallest such |C|), "multiplicity" (how many such C) and "sets" (those C).
    """
    chain_index: int
    n: int
    graph: nx.Graph

    def label(self, u: int, v: int) -> int:
        return self.graph.edges[u, v]["label"]

    def base_set(self, u: int, v: int) -> int:
        return min(self.graph.edges[u, v]["sets"], key=popcount)

    def to_json(self) -> Dict[str, Any]:
        return {
            "chain": self.chain_index,
            "edges": [
                {"e": [u, v], "label": d["label"], "multiplicity": d["multiplicity"]}
                for u, v, d in sorted(self.graph.edges(data=True))
            ],
        }


def chain_graph(fam: Family, decomposition: ChainDecomposition, chain_index: int) -> LabeledChainGraph:
    if fam.n != decomposition.n:
        raise UsageError(f"ground sets differ: [{fam.n}] versus [{decomposition.n}]")
    if not 0 <= chain_index < len(decomposition.chains):
        raise UsageError(f"chain index {chain_index} is out of range")
    graph = nx.Graph()
    graph.add_nodes_from(range(1, fam.n + 1))
    for C in decomposition.chains[chain_index]:
        outside = [j for j in range(fam.n) if not C >> j & 1]
        for (a, b) in itertools.combinations(outside, 2):
            if C | 1 << a | 1 << b not in fam:
                continue
            u, v = a + 1, b + 1
            if graph.has_edge(u, v):
                data = graph.edges[u, v]
                data["multiplicity"] += 1
                data["sets"].append(C)
                data["label"] = min(data["label"], popcount(C))
            else:
                graph.add_edge(u, v, label=popcount(C), multiplicity=1, sets=[C])
    return LabeledChainGraph(chain_index, fam.n, graph)


@dataclass(frozen=True)
class CycleViolation:
    """A 4-cycle u-v-w-x whose smallest and largest labels sit on opposite edges."""
    cycle: Tuple[int, int, int, int]
    labels: Tuple[int, int, int, int]

    def edges(self) -> List[Tuple[int, int]]:
        c = self.cycle
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    def to_json(self) -> Dict[str, Any]:
        return {"cycle": list(self.cycle), "labels": list(self.labels)}


def _opposite_extremes(labels: Sequence[int]) -> Optional[Tuple[int, int]]:
    low, high = min(labels), max(labels)
    for i in range(4):
        if labels[i] != low:
            continue
        j = (i + 2) % 4
        if labels[j] == high:
            return i, j
    return None


def _labeled(G: Any) -> nx.Graph:
    return G.graph if isinstance(G, LabeledChainGraph) else G


def check_cycle_label_condition(G: Any) -> Optional[CycleViolation]:
    """
    First 4-cycle in which a smallest-label edge is opposite a largest-label
    edge, or None when every 4-cycle keeps them adjacent. Accepts a
    LabeledChainGraph or an nx.Graph with "label" edge attributes.
    """
    graph = _labeled(G)
    nodes = sorted(graph.nodes())
    for u, w in itertools.combinations(nodes, 2):
        common = sorted(set(graph[u]) & set(graph[w]))
        for v, x in itertools.combinations(common, 2):
            cycle = (u, v, w, x)
            labels = tuple(graph.edges[cycle[i], cycle[(i + 1) % 4]]["label"] for i in range(4))
            if _opposite_extremes(labels) is not None:
                return CycleViolation(cycle, labels)
    return None


def replay_cycle_violation(fam: Family, G: LabeledChainGraph,
                           violation: CycleViolation) -> Optional[embedding.TraceViolation]:
    """
    Turn a violating 4-cycle into a diamond in the trace on [n] \\ e1, where e1
    is a smallest-label edge and e3 the opposite largest-label edge. Returns
    the confirmed copy, or None when the extracted sets do not form one.
    """
    labels = violation.labels
    i, _ = _opposite_extremes(labels)
    edges = violation.edges()
    edges = edges[i:] + edges[:i]
    sets = []
    for (u, v) in edges:
        C = G.base_set(u, v)
        sets.append(C | 1 << (u - 1) | 1 << (v - 1))
    e1 = edges[0]
    L = ((1 << fam.n) - 1) & ~(1 << (e1[0] - 1)) & ~(1 << (e1[1] - 1))
    # F1 -> a, F2 -> b, F4 -> c, F3 -> d
    preimages = (sets[0], sets[1], sets[3], sets[2])
    assignment = tuple(bits & L for bits in preimages)
    witness = embedding.EmbeddingWitness(assignment, fam.n)
    found = embedding.TraceViolation(L, fam.n, witness, preimages)
    if embedding.replay_violation(fam, diamond(), found):
        return None
    return found


def contains_complete_bipartite(G: Any, a: int, b: int) -> Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """
    Parts (A, B) of a K_{a,b} subgraph, A the lexicographically first a-set
    with at least b common neighbours, or None.
    """
    if a < 1 or a > b:
        raise UsageError(f"need 1 <= a <= b, got a={a}, b={b}")
    graph = _labeled(G)
    if graph.number_of_nodes() < a + b:
        return None
    heavy = sorted(v for v in graph.nodes() if graph.degree(v) >= b)
    for A in itertools.combinations(heavy, a):
        common = set(graph[A[0]])
        for v in A[1:]:
            common &= set(graph[v])
            if len(common) < b:
                break
        if len(common) >= b:
            return A, tuple(sorted(common)[:b])
    return None


def longest_monotone_subsequence(seq: Sequence[int]) -> Tuple[int, List[int]]:
    """
    Longest monotone subsequence. Equal values count as increasing (ties are
    broken by position); on equal lengths the increasing one is returned.
    """
    if not seq:
        return 0, []

    def longest(better) -> List[int]:
        length = [1] * len(seq)
        prev = [-1] * len(seq)
        for i in range(len(seq)):
            for j in range(i):
                if better(seq[j], seq[i]) and length[j] + 1 > length[i]:
                    length[i] = length[j] + 1
                    prev[i] = j
        i = max(range(len(seq)), key=lambda k: (length[k], -k))
        out = []
        while i >= 0:
            out.append(seq[i])
            i = prev[i]
        return list(reversed(out))

    up = longest(lambda x, y: x <= y)
    down = longest(lambda x, y: x > y)
    best = up if len(up) >= len(down) else down
    return len(best), best


@dataclass
class DiamondAudit:
    """
    Result of auditing every chain graph of a family.

    Attributes:
        n: Ground-set size
        chains_checked: Number of chain graphs built
        edge_incidences: Sum of multiplicities over all chain graphs
        expected_incidences: Σ_F C(|F|, 2)
        multiplicity_violations: Edges whose multiplicity exceeds 3
        cycle_violations: Violating 4-cycles with their replayed diamond copies
    """
    n: int
    chains_checked: int
    edge_incidences: int
    expected_incidences: int
    multiplicity_violations: List[Dict[str, Any]] = field(default_factory=list)
    cycle_violations: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.multiplicity_violations and not self.cycle_violations

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "passed": self.passed,
            "chains_checked": self.chains_checked,
            "edge_incidences": self.edge_incidences,
            "expected_incidences": self.expected_incidences,
            "multiplicity_violations": self.multiplicity_violations,
            "cycle_violations": self.cycle_violations,
        }


def diamond_audit(fam: Family, decomposition: Optional[ChainDecomposition] = None) -> DiamondAudit:
    """Build all chain graphs, check multiplicities and 4-cycles, replay each violation."""
    if decomposition is None:
        decomposition = symmetric_chain_decomposition(fam.n)
    audit = DiamondAudit(
        n=fam.n,
        chains_checked=0,
        edge_incidences=0,
        expected_incidences=sum(math.comb(popcount(bits), 2) for bits in fam.members),
    )
    for c in range(len(decomposition.chains)):
        G = chain_graph(fam, decomposition, c)
        audit.chains_checked += 1
        for u, v, data in sorted(G.graph.edges(data=True)):
            audit.edge_incidences += data["multiplicity"]
            if data["multiplicity"] > 3:
                audit.multiplicity_violations.append(
                    {"chain": c, "e": [u, v], "multiplicity": data["multiplicity"]}
                )
        violation = check_cycle_label_condition(G)
        if violation is not None:
            replayed = replay_cycle_violation(fam, G, violation)
            entry = violation.to_json()
            entry["chain"] = c
            entry["diamond"] = replayed.to_json() if replayed is not None else None
            audit.cycle_violations.append(entry)
    return audit


@dataclass
class FalsificationReport:
    """
    Outcome of the randomized search for K_{a,b} in graphs passing the 4-cycle
    condition. A clean run is recorded as "no counterexample found", not as proof.
    """
    trials: int
    a: int
    b: int
    max_vertices: int
    seed: int
    edges_removed: int
    counterexamples: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "counterexample found" if self.counterexamples else "no counterexample found"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trials": self.trials,
            "a": self.a,
            "b": self.b,
            "max_vertices": self.max_vertices,
            "seed": self.seed,
            "edges_removed": self.edges_removed,
            "verdict": self.verdict,
            "counterexamples": self.counterexamples,
        }


def repair_cycle_condition(graph: nx.Graph) -> int:
    """Delete a largest-label edge of each violating 4-cycle until none is left; returns deletions."""
    removed = 0
    while True:
        violation = check_cycle_label_condition(graph)
        if violation is None:
            return removed
        edges = violation.edges()
        k = max(range(4), key=lambda i: (violation.labels[i], -i))
        graph.remove_edge(*edges[k])
        removed += 1


def random_labeled_graph(rng: random.Random, vertices: int, density: float, max_label: int) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(1, vertices + 1))
    for u, v in itertools.combinations(range(1, vertices + 1), 2):
        if rng.random() < density:
            graph.add_edge(u, v, label=rng.randrange(max_label + 1))
    return graph


def falsify_bipartite_bound(trials: int, max_vertices: int = 25, seed: int = 0, a: int = 3, b: int = 17,
                            density: float = 0.2, logger: Optional[Logger] = None) -> FalsificationReport:
    """
    Draw random labeled graphs on a+b..max_vertices vertices, repair them until
    they pass the 4-cycle condition, and look for K_{a,b}.
    """
    if max_vertices < a + b:
        raise UsageError(f"max_vertices must be at least a+b = {a + b}")
    rng = random.Random(seed)
    report = FalsificationReport(trials, a, b, max_vertices, seed, edges_removed=0)
    for t in range(trials):
        vertices = rng.randint(a + b, max_vertices)
        graph = random_labeled_graph(rng, vertices, density, max_label=vertices)
        report.edges_removed += repair_cycle_condition(graph)
        found = contains_complete_bipartite(graph, a, b)
        if found is not None:
            report.counterexamples.append({"trial": t, "parts": [list(found[0]), list(found[1])]})
        if logger is not None and (t + 1) % 1000 == 0:
            logger.debug("Falsification progress", trials=t + 1, counterexamples=len(report.counterexamples))
    return report


def chain_shadow_violations(antichain: Family, s: int,
                            decomposition: Optional[ChainDecomposition] = None) -> List[Dict[str, Any]]:
    """
    Chains of s+1 shadow members of the antichain. A chain G_1 ⊊ ... ⊊ G_{s+1}
    in the shadow lies on some maximal chain of 2^[n], so the check is the
    longest chain of the shadow family.

    Args:
        antichain: Family whose shadow is inspected
        s: Largest number of shadow members allowed on one maximal chain
        decomposition: Symmetric chain decomposition for the per-chain detail

    Returns:
        Empty list when the shadow has no (s+1)-chain. Otherwise the first
        entry ("maximal_chain") holds s+1 nested shadow sets, followed by one
        "scd_chain" entry per decomposition chain holding more than s of them.
    """
    if s < 0:
        raise UsageError(f"s must be non-negative, got {s}")
    below = shadow(antichain)
    longest = longest_chain(below)
    if len(longest) <= s:
        return []
    out: List[Dict[str, Any]] = [
        {"kind": "maximal_chain", "shadow_sets": [list(mask_elements(g)) for g in longest[:s + 1]]}
    ]
    if decomposition is None:
        decomposition = symmetric_chain_decomposition(antichain.n)
    per_chain: Dict[int, List[int]] = {}
    for G in below.members:
        per_chain.setdefault(decomposition.chain_of[G], []).append(G)
    out.extend(
        {"kind": "scd_chain", "chain": c, "shadow_sets": [list(mask_elements(g)) for g in sorted(members)]}
        for c, members in sorted(per_chain.items())
        if len(members) > s
    )
    return out


def shadow_cover_violations(antichain: Family, s: int) -> List[Dict[str, Any]]:
    """Shadow members contained in more than s members of the antichain."""
    out = []
    for G in shadow(antichain).members:
        count = sum(1 for F in antichain.members if F & G == G)
        if count > s:
            out.append({"set": list(mask_elements(G)), "covering_members": count})
    return out
