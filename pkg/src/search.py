"""
Exact extremal solvers for La(n,P), Tr(n,P) and Tr_l(n,P).

Branch-and-bound over families of subsets of [n], grown member by member in a
fixed total order of 2^[n]. With symmetry on, a node survives only if its
sorted rank tuple is the smallest in its orbit (orderly generation), so each
isomorphism class is visited once. Pruning combines:

  - the chain bound: a P-free family has at most |P|-1 members on any chain of
    a symmetric chain decomposition;
  - the Sauer cap Σ_{i<=y(P)} C(n,i) for trace P-free families;
  - the count cut: every trace on an (n-1)-set stays within Tr(n-1,P).

Workers split the tree at a fixed depth and share the best value found.
"""

import math
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import Value
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src import embedding
from src.chains import symmetric_chain_decomposition
from src.core_sets import (
    EXACT_CANONICAL_MAX_N,
    Family,
    dihedral_table,
    is_lex_min_in_orbit,
    levels_at_most,
    permutation_table,
    popcount,
)
from src.errors import BudgetExhausted, CapabilityError, IntegrityError, UncertifiedError, UsageError
from src.logger import Logger
from src.models import ExtremalResult, SearchBudget
from src.posets import Poset, has_unique_max, param_x, param_y, poset_id

SEARCH_KINDS = ("la", "tr", "tr_l")
FRONTIER_DEPTH = 2
SYNC_EVERY = 1024
LA_EXACT_MAX_N = 7

# Tr(k,P) values certified by earlier solves, keyed by (kind, poset, k, l).
_CAP_CACHE: Dict[Tuple[str, Poset, int, Optional[int]], int] = {}


class _Stop(Exception):
    """Budget exhausted inside the search."""


class _Done(Exception):
    """The best value reached the root bound."""


class _Found(Exception):
    """Target mode reached the requested size."""

    def __init__(self, members: Tuple[int, ...]):
        super().__init__()
        self.members = members


@dataclass
class _Spec:
    """Picklable description of one search, rebuilt inside worker processes."""
    kind: str
    n: int
    p: int
    relations: Tuple[Tuple[int, int], ...]
    l: Optional[int]
    cap_prev: Optional[int]
    symmetry: str
    order: Tuple[int, ...]
    root_bound: int
    chain_cap: Optional[int]
    deadline: float
    node_limit: int
    target: Optional[int] = None


def universe_order(kind: str, n: int) -> Tuple[int, ...]:
    """
    Member order of the search. La takes middle levels first so the greedy
    descent reaches the Sperner-type optimum at once; trace searches use colex.
    """
    masks = range(1 << n)
    if kind == "la":
        return tuple(sorted(masks, key=lambda m: (abs(2 * popcount(m) - n), popcount(m), m)))
    return tuple(masks)


def chain_bound(n: int, cap: int) -> int:
    """Σ over the chains of a symmetric chain decomposition of min(|chain|, cap)."""
    return sum(min(len(chain), cap) for chain in symmetric_chain_decomposition(n).chains)


def sauer_cap(n: int, k: int) -> int:
    """Σ_{i<=k} C(n,i)."""
    return sum(math.comb(n, i) for i in range(0, min(k, n) + 1))


class _Engine:
    """
    One branch-and-bound run. States are tuples whose first entry is the
    sorted member tuple; trace searches also carry per-L trace sets and the
    projections onto the (n-1)-sets used by the count cut.
    """

    def __init__(self, spec: _Spec, shared: Optional[Tuple[Any, Any]] = None,
                 logger: Optional[Logger] = None, progress_every: int = 100000):
        self.spec = spec
        self.n = spec.n
        self.P = Poset(spec.p, frozenset(spec.relations))
        self.shared = shared
        self.logger = logger
        self.progress_every = progress_every

        self.rank = np.empty(1 << spec.n, dtype=np.int64)
        for position, bits in enumerate(spec.order):
            self.rank[bits] = position
        if spec.symmetry == "exact":
            self.table = permutation_table(spec.n)
        elif spec.symmetry == "heuristic":
            self.table = dihedral_table(spec.n)
        else:
            self.table = None

        decomposition = symmetric_chain_decomposition(spec.n)
        self.chain_of = decomposition.chain_of

        if spec.kind == "tr":
            sizes = embedding.trace_sweep_levels(self.P, spec.n)
        elif spec.kind == "tr_l":
            sizes = [spec.l]
        else:
            sizes = []
        self.Ls = [L for l in sizes for L in embedding.subsets_of_size(spec.n, l)]
        full = (1 << spec.n) - 1
        self.Ys = [full ^ (1 << y) for y in range(spec.n)] if spec.cap_prev is not None else []

        self.best = -1
        self.best_members: Optional[Tuple[int, ...]] = None
        self.nodes = 0
        self._unsynced = 0
        self._shared_best = -1

    def root_state(self) -> Tuple:
        if self.spec.kind == "la":
            return ((),)
        empty = frozenset()
        return ((), tuple(empty for _ in self.Ls), tuple(empty for _ in self.Ys))

    def extend(self, state: Tuple, bits: int) -> Optional[Tuple]:
        """State after adding `bits`, or None when the family stops being admissible."""
        members = tuple(sorted(state[0] + (bits,)))
        if self.spec.kind == "la":
            if embedding._search(members, self.P, forced=members.index(bits)) is not None:
                return None
            return (members,)

        projections = state[2]
        new_projections = []
        for Y, seen in zip(self.Ys, projections):
            t = bits & Y
            if t in seen:
                new_projections.append(seen)
            elif len(seen) + 1 > self.spec.cap_prev:
                return None
            else:
                new_projections.append(seen | {t})

        new_traces = []
        for L, seen in zip(self.Ls, state[1]):
            t = bits & L
            if t in seen:
                new_traces.append(seen)
                continue
            grown = seen | {t}
            if len(grown) >= self.P.p and embedding.contains_copy(tuple(sorted(grown)), self.P):
                return None
            new_traces.append(grown)
        return (members, tuple(new_traces), tuple(new_projections))

    def _threshold(self) -> int:
        if self.spec.target is not None:
            return self.spec.target - 1
        return max(self.best, self._shared_best)

    def _bound(self, members: Sequence[int], cands: Sequence[Tuple[int, Tuple]]) -> int:
        size = len(members)
        if self.spec.chain_cap is None:
            return min(self.spec.root_bound, size + len(cands))
        used = Counter(self.chain_of[m] for m in members)
        avail = Counter(self.chain_of[m] for m, _ in cands)
        extra = sum(min(count, self.spec.chain_cap - used[c]) for c, count in avail.items())
        return min(self.spec.root_bound, size + extra)

    def _sync(self) -> None:
        if self.shared is not None:
            best_cell, node_cell = self.shared
            with node_cell.get_lock():
                node_cell.value += self._unsynced
                total = node_cell.value
            self._shared_best = best_cell.value
        else:
            total = self.nodes
        self._unsynced = 0
        if time.time() > self.spec.deadline or total > self.spec.node_limit:
            raise _Stop()
        if self.spec.target is None and self._shared_best >= self.spec.root_bound:
            raise _Done()

    def flush_nodes(self) -> None:
        if self.shared is not None and self._unsynced:
            node_cell = self.shared[1]
            with node_cell.get_lock():
                node_cell.value += self._unsynced
            self._unsynced = 0

    def _tick(self) -> None:
        self.nodes += 1
        self._unsynced += 1
        if self._unsynced >= SYNC_EVERY:
            self._sync()
        if self.logger is not None and self.nodes % self.progress_every == 0:
            self.logger.debug("Search progress", nodes=self.nodes, best=self.best)

    def _record(self, members: Tuple[int, ...]) -> None:
        size = len(members)
        if self.spec.target is not None:
            if size >= self.spec.target:
                raise _Found(members)
            return
        if size > self.best:
            self.best = size
            self.best_members = members
            if self.shared is not None:
                best_cell = self.shared[0]
                with best_cell.get_lock():
                    if size > best_cell.value:
                        best_cell.value = size
            if size >= self.spec.root_bound:
                raise _Done()

    def candidates(self, state: Tuple, pool: Sequence[int]) -> List[Tuple[int, Tuple]]:
        out = []
        for bits in pool:
            child = self.extend(state, bits)
            if child is not None:
                out.append((bits, child))
        return out

    def _canonical(self, members: Tuple[int, ...]) -> bool:
        return self.table is None or is_lex_min_in_orbit(members, self.n, self.rank, self.table)

    def dfs(self, state: Tuple, cands: List[Tuple[int, Tuple]]) -> None:
        members = state[0]
        self._tick()
        self._record(members)
        if self._bound(members, cands) <= self._threshold():
            return
        size = len(members)
        for idx, (_, child) in enumerate(cands):
            if size + len(cands) - idx <= self._threshold():
                break
            if not self._canonical(child[0]):
                continue
            later = self.candidates(child, [m for m, _ in cands[idx + 1:]])
            self.dfs(child, later)

    def frontier(self, state: Tuple, cands: List[Tuple[int, Tuple]], depth: int,
                 out: List[Tuple[Tuple[int, ...], Tuple[int, ...]]]) -> None:
        """Collect subtree roots at `depth` in DFS order; shallower nodes are recorded here."""
        members = state[0]
        if len(members) == depth:
            out.append((members, tuple(m for m, _ in cands)))
            return
        self._tick()
        self._record(members)
        for idx, (_, child) in enumerate(cands):
            if not self._canonical(child[0]):
                continue
            later = self.candidates(child, [m for m, _ in cands[idx + 1:]])
            self.frontier(child, later, depth, out)

    def state_of(self, members: Sequence[int]) -> Tuple:
        state = self.root_state()
        for bits in members:
            state = self.extend(state, bits)
            if state is None:
                raise IntegrityError("frontier prefix is not admissible")
        return state

    def run(self) -> str:
        """Search the whole tree; returns "complete" or "stopped"."""
        root = self.root_state()
        try:
            self.dfs(root, self.candidates(root, self.spec.order))
        except _Done:
            return "complete"
        except _Stop:
            return "stopped"
        return "complete"


_WORKER: Optional[_Engine] = None


def _worker_init(spec: _Spec, best_cell: Any, node_cell: Any) -> None:
    global _WORKER
    _WORKER = _Engine(spec, shared=(best_cell, node_cell))


def _worker_run(task: Tuple[Tuple[int, ...], Tuple[int, ...]]) -> Tuple[int, Optional[Tuple[int, ...]], int, str]:
    engine = _WORKER
    engine.best, engine.best_members, engine.nodes = -1, None, 0
    members, pool = task
    state = engine.state_of(members)
    outcome = "complete"
    try:
        engine._sync()
        engine.dfs(state, engine.candidates(state, pool))
    except _Done:
        pass
    except _Stop:
        outcome = "stopped"
    engine.flush_nodes()
    return engine.best, engine.best_members, engine.nodes, outcome


def trace_caps(P: Poset, n: int, budget: SearchBudget, kind: str = "tr", l: Optional[int] = None,
               logger: Optional[Logger] = None) -> Optional[int]:
    """
    The certified value for ground-set size n (Tr(n,P) or Tr_l(n,P)), solving
    it on demand. Returns None when it cannot be certified within budget.
    """
    key = (kind, P, n, l)
    if key in _CAP_CACHE:
        return _CAP_CACHE[key]
    if kind == "tr":
        result = ExtremalSearch(budget, logger).solve_tr(n, P)
    else:
        result = ExtremalSearch(budget, logger).solve_tr_l(n, l, P)
    if not result.is_exact:
        return None
    _CAP_CACHE[key] = result.value
    return result.value


def seed_cap(kind: str, P: Poset, n: int, value: int, l: Optional[int] = None) -> None:
    """Register an externally certified value (e.g. from the catalog) for the count cut."""
    _CAP_CACHE[(kind, P, n, l)] = value


class ExtremalSearch:
    """
    Runs exact extremal solves under one SearchBudget.

    Every exact result carries a witness that is re-checked with the
    independent predicates of `embedding`, the explored node count and the
    pruning bounds that were used.
    """

    def __init__(self, budget: Optional[SearchBudget] = None, logger: Optional[Logger] = None,
                 progress_every: int = 100000):
        self.budget = budget or SearchBudget()
        self.logger = logger or Logger(level="WARNING")
        self.progress_every = progress_every

    def solve_la(self, n: int, P: Poset) -> ExtremalResult:
        if n > LA_EXACT_MAX_N:
            raise CapabilityError(f"La searches are supported for n <= {LA_EXACT_MAX_N}, got {n}")
        return self._solve("la", n, P)

    def solve_tr(self, n: int, P: Poset) -> ExtremalResult:
        return self._solve("tr", n, P)

    def solve_tr_l(self, n: int, l: int, P: Poset) -> ExtremalResult:
        if l < 1 or l > n:
            raise UsageError(f"trace size l must be in 1..{n}, got {l}")
        return self._solve("tr_l", n, P, l=l)

    def _bounds(self, kind: str, n: int, P: Poset, l: Optional[int]) -> Tuple[int, Optional[int], Optional[int], Dict[str, Any]]:
        bounds: Dict[str, Any] = {"universe": 1 << n}
        root = 1 << n
        chain_cap = None
        if kind in ("la", "tr"):
            chain_cap = P.p - 1
            bounds["chain"] = chain_bound(n, chain_cap)
            root = min(root, bounds["chain"])
        try:
            y = param_y(P)
        except UncertifiedError:
            y = None
        if y is not None and kind == "tr":
            bounds["sauer"] = sauer_cap(n, y)
            root = min(root, bounds["sauer"])
        if y is not None and kind == "tr_l" and l >= y + 1:
            bounds["sauer_l"] = sauer_cap(n, l - 1)
            root = min(root, bounds["sauer_l"])

        cap_prev = None
        if kind == "tr" and n > 1:
            cap_prev = trace_caps(P, n - 1, self.budget, "tr", logger=self.logger)
        elif kind == "tr_l" and l <= n - 1:
            cap_prev = trace_caps(P, n - 1, self.budget, "tr_l", l=l, logger=self.logger)
        if cap_prev is not None:
            bounds["count_cut"] = cap_prev
            root = min(root, 2 * cap_prev)
        bounds["root"] = root
        return root, cap_prev, chain_cap, bounds

    def _spec(self, kind: str, n: int, P: Poset, l: Optional[int], order: Sequence[int],
              target: Optional[int] = None) -> Tuple[_Spec, Dict[str, Any]]:
        symmetry = self.budget.symmetry
        if symmetry == "exact" and n > EXACT_CANONICAL_MAX_N:
            raise CapabilityError(f"exact symmetry is supported for n <= {EXACT_CANONICAL_MAX_N}")
        root, cap_prev, chain_cap, bounds = self._bounds(kind, n, P, l)
        spec = _Spec(
            kind=kind, n=n, p=P.p, relations=tuple(sorted(P.relations)), l=l,
            cap_prev=cap_prev, symmetry=symmetry, order=tuple(order), root_bound=root,
            chain_cap=chain_cap, deadline=time.time() + self.budget.time_limit,
            node_limit=self.budget.node_limit, target=target,
        )
        return spec, bounds

    def _solve(self, kind: str, n: int, P: Poset, l: Optional[int] = None) -> ExtremalResult:
        started = time.monotonic()
        self.logger.info("Starting solve", kind=kind, n=n, l=l, poset=P.label(),
                         workers=self.budget.workers, symmetry=self.budget.symmetry)
        spec, bounds = self._spec(kind, n, P, l, universe_order(kind, n))

        if self.budget.workers > 1:
            best, members, nodes, outcome = self._run_parallel(spec)
        else:
            engine = _Engine(spec, logger=self.logger, progress_every=self.progress_every)
            outcome = engine.run()
            best, members, nodes = engine.best, engine.best_members, engine.nodes

        if members is None:
            status = "timeout"
        elif outcome == "complete":
            status = "exact"
        else:
            status = "lower_bound_only"

        witness = Family(n, tuple(members)) if members is not None else None
        if witness is not None:
            self._check_witness(kind, witness, P, l)

        result = ExtremalResult(
            kind=kind, n=n, poset_id=poset_id(P), poset_label=P.label(), value=max(best, 0),
            status=status, witness=witness, nodes=nodes, l=l, bounds=bounds,
            symmetry=self.budget.symmetry, elapsed=time.monotonic() - started,
        )
        self.logger.info("Search finished", kind=kind, n=n, l=l, poset=P.label(), value=result.value,
                         status=status, nodes=nodes, elapsed=round(result.elapsed, 3))
        return result

    def _run_parallel(self, spec: _Spec) -> Tuple[int, Optional[Tuple[int, ...]], int, str]:
        head = _Engine(spec, logger=self.logger)
        root = head.root_state()
        tasks: List[Tuple[Tuple[int, ...], Tuple[int, ...]]] = []
        try:
            head.frontier(root, head.candidates(root, spec.order), FRONTIER_DEPTH, tasks)
        except _Done:
            return head.best, head.best_members, head.nodes, "complete"

        best_cell = Value("i", head.best)
        node_cell = Value("q", head.nodes)
        best, members, outcome = head.best, head.best_members, "complete"
        with ProcessPoolExecutor(max_workers=self.budget.workers, initializer=_worker_init,
                                 initargs=(spec, best_cell, node_cell)) as pool:
            for value, found, _, task_outcome in pool.map(_worker_run, tasks):
                if value > best:
                    best, members = value, found
                if task_outcome == "stopped":
                    outcome = "stopped"
        nodes = node_cell.value

        if outcome == "complete" and members is not None:
            # Worker timing decides which optimum is found first; the witness is
            # the first family of that size in sequential DFS order.
            first = self._first_hit(spec, best)
            if first is not None:
                members = first
        return best, members, nodes, outcome

    def _first_hit(self, spec: _Spec, target: int) -> Optional[Tuple[int, ...]]:
        probe = _Spec(**{**spec.__dict__, "target": target,
                         "deadline": time.time() + self.budget.time_limit})
        engine = _Engine(probe)
        root = engine.root_state()
        try:
            engine.dfs(root, engine.candidates(root, probe.order))
        except _Found as hit:
            return hit.members
        except _Stop:
            return None
        return None

    def _check_witness(self, kind: str, witness: Family, P: Poset, l: Optional[int]) -> None:
        if kind == "la":
            ok = embedding.is_p_free(witness, P)
        elif kind == "tr":
            ok = embedding.is_trace_p_free(witness, P)
        else:
            ok = embedding.is_l_trace_p_free(witness, P, l)
        if not ok:
            raise IntegrityError(f"{kind} witness for {P.label()} at n={witness.n} fails its predicate")

    def confirm_upper_bound(self, kind: str, n: int, P: Poset, value: int, seed: int = 0,
                            l: Optional[int] = None) -> bool:
        """
        Re-establish that no admissible family of size value+1 exists, searching
        the members in a seeded shuffled order. False means such a family was found.

        Raises:
            BudgetExhausted: If the budget ran out before the search finished
        """
        if kind not in SEARCH_KINDS:
            raise UsageError(f"kind must be one of {SEARCH_KINDS}, got {kind!r}")
        order = list(range(1 << n))
        random.Random(seed).shuffle(order)
        spec, _ = self._spec(kind, n, P, l, order, target=value + 1)
        engine = _Engine(spec, logger=self.logger)
        root = engine.root_state()
        try:
            engine.dfs(root, engine.candidates(root, spec.order))
        except _Found:
            return False
        except _Stop:
            raise BudgetExhausted(f"re-verification of {kind}({n}) <= {value} ran out of budget")
        self.logger.info("Upper bound confirmed", kind=kind, n=n, l=l, poset=P.label(),
                         value=value, seed=seed, nodes=engine.nodes)
        return True


def solve_la(n: int, P: Poset, budget: Optional[SearchBudget] = None,
             logger: Optional[Logger] = None) -> ExtremalResult:
    return ExtremalSearch(budget, logger).solve_la(n, P)


def solve_tr(n: int, P: Poset, budget: Optional[SearchBudget] = None,
             logger: Optional[Logger] = None) -> ExtremalResult:
    return ExtremalSearch(budget, logger).solve_tr(n, P)


def solve_tr_l(n: int, l: int, P: Poset, budget: Optional[SearchBudget] = None,
               logger: Optional[Logger] = None) -> ExtremalResult:
    return ExtremalSearch(budget, logger).solve_tr_l(n, l, P)


def confirm_upper_bound(kind: str, n: int, P: Poset, value: int, seed: int = 0,
                        budget: Optional[SearchBudget] = None, l: Optional[int] = None) -> bool:
    return ExtremalSearch(budget).confirm_upper_bound(kind, n, P, value, seed=seed, l=l)


def unique_max_trace_value(n: int, P: Poset) -> ExtremalResult:
    """
    Tr(n,P) for a poset with a unique maximum: Σ_{i<=x} C(n,i) with x = x(n,P),
    witnessed by C([n], <=x) and checked trace P-free.

    Raises:
        UsageError: If P has no unique maximum
    """
    if not has_unique_max(P):
        raise UsageError(f"{P.label()} has no unique maximum element")
    started = time.monotonic()
    x = param_x(P, n)
    witness = levels_at_most(n, x) if x >= 0 else Family.empty(n)
    if not embedding.is_trace_p_free(witness, P):
        raise IntegrityError(f"C([{n}], <= {x}) is not trace {P.label()}-free")
    return ExtremalResult(
        kind="tr", n=n, poset_id=poset_id(P), poset_label=P.label(), value=len(witness),
        status="exact", witness=witness, nodes=0,
        bounds={"method": "unique_max_identity", "x": x},
        elapsed=time.monotonic() - started,
    )


@dataclass
class SandwichReport:
    """
    Σ_{i<=x} C(n,i) <= La_D <= Tr <= Σ_{i<=y} C(n,i) and Tr >= max(La_D, La_U)
    evaluated at one n.
    """
    n: int
    poset: str
    x: int
    y: Optional[int]
    lower: int
    la_d: int
    la_u: int
    tr: int
    upper: Optional[int]
    exact: bool
    failures: List[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "poset": self.poset,
            "x": self.x,
            "y": self.y,
            "lower": self.lower,
            "la_d": self.la_d,
            "la_u": self.la_u,
            "tr": self.tr,
            "upper": self.upper,
            "exact": self.exact,
            "holds": self.holds,
            "failures": self.failures,
        }


def sandwich_report(n: int, P: Poset, budget: Optional[SearchBudget] = None,
                    logger: Optional[Logger] = None) -> SandwichReport:
    from src.downsets import solve_la_closed

    x = param_x(P, n)
    try:
        y: Optional[int] = param_y(P)
    except UncertifiedError:
        y = None
    la_d = solve_la_closed(n, P, "down")
    la_u = solve_la_closed(n, P, "up")
    tr = solve_tr(n, P, budget, logger)
    lower = sauer_cap(n, x) if x >= 0 else 0
    upper = sauer_cap(n, y) if y is not None and y >= 0 else None
    report = SandwichReport(
        n=n, poset=P.label(), x=x, y=y, lower=lower, la_d=la_d.value, la_u=la_u.value,
        tr=tr.value, upper=upper, exact=la_d.is_exact and la_u.is_exact and tr.is_exact,
    )
    if lower > la_d.value:
        report.failures.append(f"lower bound {lower} exceeds La_D = {la_d.value}")
    if tr.is_exact and la_d.value > tr.value:
        report.failures.append(f"La_D = {la_d.value} exceeds Tr = {tr.value}")
    if tr.is_exact and max(la_d.value, la_u.value) > tr.value:
        report.failures.append(f"Tr = {tr.value} is below max(La_D, La_U) = {max(la_d.value, la_u.value)}")
    if upper is not None and tr.value > upper:
        report.failures.append(f"Tr = {tr.value} exceeds the Sauer cap {upper}")
    return report
