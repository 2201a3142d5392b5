"""
Data Models for trace-posets

This module defines the record types passed between the solvers, the
construction verifiers, the catalog and the CLI. Structural types with
behavior (Family, Poset, witnesses) live next to their algebra.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.core_sets import Family
from src.errors import UsageError

SYMMETRY_MODES = ("exact", "heuristic", "off")
RESULT_KINDS = ("la", "la_d", "la_u", "tr", "tr_l", "arrow")
STATUSES = ("exact", "lower_bound_only", "timeout")


@dataclass(frozen=True)
class SearchBudget:
    """
    Limits for one exact computation.

    Attributes:
        time_limit: Wall-clock seconds before the search gives up
        node_limit: Maximum number of search nodes across all workers
        workers: Worker processes (1 runs in-process)
        symmetry: "exact" (orbit-exact isomorph rejection), "heuristic" or "off"
    """
    time_limit: float = 600.0
    node_limit: int = 50_000_000
    workers: int = 1
    symmetry: str = "exact"

    def __post_init__(self) -> None:
        if self.time_limit <= 0 or self.node_limit <= 0 or self.workers <= 0:
            raise UsageError("budget limits must be positive")
        if self.symmetry not in SYMMETRY_MODES:
            raise UsageError(f"symmetry must be one of {SYMMETRY_MODES}, got {self.symmetry!r}")


@dataclass
class ExtremalResult:
    """
    Outcome of an extremal solve.

    When status is "exact" the witness has exactly `value` members, passes the
    freeness predicate of `kind`, and the search certified that no family of
    size value + 1 exists.

    Attributes:
        kind: One of RESULT_KINDS
        n: Ground-set size
        poset_id: Canonical poset id (see posets.poset_id)
        poset_label: Human-readable poset name
        value: Best size found (the maximum when exact)
        status: "exact", "lower_bound_only" or "timeout"
        witness: Extremal family, or None when nothing was found
        nodes: Search nodes explored
        l: Trace size for kind "tr_l"
        bounds: Pruning bounds used (name -> value), kept for audit
        symmetry: Symmetry mode the search ran with
        elapsed: Seconds spent
    """
    kind: str
    n: int
    poset_id: str
    poset_label: str
    value: int
    status: str
    witness: Optional[Family]
    nodes: int
    l: Optional[int] = None
    bounds: Dict[str, Any] = field(default_factory=dict)
    symmetry: str = "exact"
    elapsed: float = 0.0

    @property
    def is_exact(self) -> bool:
        return self.status == "exact"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "n": self.n,
            "l": self.l,
            "poset_id": self.poset_id,
            "poset": self.poset_label,
            "value": self.value,
            "status": self.status,
            "witness": self.witness.to_json() if self.witness is not None else None,
            "nodes": self.nodes,
            "bounds": self.bounds,
            "symmetry": self.symmetry,
            "elapsed": round(self.elapsed, 3),
        }


@dataclass
class ArrowResult:
    """
    Outcome of an arrow-relation check (n, m) -> (k, l).

    Attributes:
        n, m, k, l: The relation parameters
        holds: Whether the relation holds
        counterexample: Canonically smallest downset of size m with no good k-set
        method: "vacuous", "shattering" or "enumeration"
        downsets_checked: Downsets examined (orbit representatives when symmetric)
    """
    n: int
    m: int
    k: int
    l: int
    holds: bool
    counterexample: Optional[Family]
    method: str
    downsets_checked: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "l": self.l,
            "holds": self.holds,
            "counterexample": self.counterexample.to_json() if self.counterexample is not None else None,
            "method": self.method,
            "downsets_checked": self.downsets_checked,
        }


@dataclass
class ConstructionReport:
    """
    Result of verifying a lower-bound construction.

    Attributes:
        name: Construction name (e.g. "butterfly_lower")
        params: Construction parameters
        family: The generated family
        claimed_size: Value of the construction's size formula
        predicate: Freeness predicate id that was checked (None for size-only)
        passed: True iff size matches and the predicate holds
        failures: Human-readable reasons for failure, first violated invariant first
        violation: JSON form of the witness that broke the predicate, if any
    """
    name: str
    params: Dict[str, Any]
    family: Family
    claimed_size: int
    predicate: Optional[str]
    passed: bool
    failures: List[str] = field(default_factory=list)
    violation: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "params": self.params,
            "family": self.family.to_json(),
            "claimed_size": self.claimed_size,
            "size": len(self.family),
            "predicate": self.predicate,
            "passed": self.passed,
            "failures": self.failures,
            "violation": self.violation,
        }


@dataclass(frozen=True)
class CatalogKey:
    """Identity of a catalog value: quantity kind, poset id, n and optional l."""
    kind: str
    poset_id: str
    n: int
    l: Optional[int] = None

    def as_tuple(self) -> Tuple[str, str, int, int]:
        return (self.kind, self.poset_id, self.n, -1 if self.l is None else self.l)


@dataclass
class CatalogEntry:
    """
    Persisted record of one computed value.

    Attributes:
        key: CatalogKey
        poset_label: Human-readable poset name
        value: Stored value
        status: Result status (exact / lower_bound_only / timeout)
        witness_ref: sha256 of the witness blob, or None
        method: Bounds, symmetry mode, stabilization ranges, node counts
        tool_version: Version string of the tool that produced it
        timestamp: ISO 8601 UTC creation time
    """
    key: CatalogKey
    poset_label: str
    value: int
    status: str
    witness_ref: Optional[str]
    method: Dict[str, Any]
    tool_version: str
    timestamp: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.key.kind,
            "poset_id": self.key.poset_id,
            "n": self.key.n,
            "l": self.key.l,
            "poset": self.poset_label,
            "value": self.value,
            "status": self.status,
            "witness_ref": self.witness_ref,
            "method": self.method,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }


@dataclass
class Certificate:
    """
    A claim plus the evidence that should replay it.

    Attributes:
        claim: Predicate name and parameters, e.g.
            {"predicate": "trace_p_free", "poset": {...}, "n": 5, "value": 8}
        evidence: JSON evidence (family, embedding witness, downset, 4-cycle)
    """
    claim: Dict[str, Any]
    evidence: Dict[str, Any]


@dataclass
class VerificationReport:
    """
    Outcome of replaying a certificate.

    Attributes:
        passed: True iff every replayed check passed
        checks: Names of the checks that ran, in order
        failures: Reasons for failure, first violated invariant first
        solver_trusted: Claims that could not be replayed without the solver
    """
    passed: bool
    checks: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    solver_trusted: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "solver_trusted": self.solver_trusted,
        }
