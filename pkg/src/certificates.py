"""
Certificate replay and conjecture probes.

verify_certificate re-checks a claim using only the predicates of
`embedding`, `chains` and `core_sets`; it never calls the search engine.
Claims that something does NOT exist beyond the stored value (upper
bounds) cannot be replayed that way and are listed as solver-trusted.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src import embedding
from src.catalog import Catalog
from src.chains import LabeledChainGraph, chain_graph, check_cycle_label_condition, replay_cycle_violation, \
    symmetric_chain_decomposition
from src.core_sets import Family, is_downward_closed, is_upward_closed, mask_elements
from src.errors import IntegrityError, SchemaError, UncertifiedError, UsageError
from src.logger import Logger
from src.models import Certificate, CatalogEntry, SearchBudget, VerificationReport
from src.posets import Poset, butterfly, param_e, parse_poset, poset_from_json, poset_id
from src.search import solve_tr_l

CLAIM_PREDICATES = ("p_free", "trace_p_free", "l_trace_p_free", "la_d", "la_u",
                    "contains", "trace_contains", "arrow_fails", "cycle_diamond")
# Entry kinds whose witness is checked against the matching freeness predicate.
_KIND_PREDICATE = {"la": "p_free", "la_d": "la_d", "la_u": "la_u", "tr": "trace_p_free", "tr_l": "l_trace_p_free"}

DATA_POINT_NOTE = "finite data point, not evidence of the limit"


def _poset_of(claim: Dict[str, Any]) -> Poset:
    raw = claim.get("poset")
    if isinstance(raw, dict):
        return poset_from_json(raw)
    if isinstance(raw, str):
        return parse_poset(raw)
    raise SchemaError("claim needs a 'poset' (name or JSON)")


def _family_of(evidence: Dict[str, Any], key: str = "family") -> Family:
    if key not in evidence:
        raise SchemaError(f"evidence needs a {key!r} document")
    return Family.from_json(evidence[key])


class _Replay:
    """Collects checks and failures while a certificate is replayed."""

    def __init__(self) -> None:
        self.report = VerificationReport(passed=True)

    def check(self, name: str, failures: Sequence[str]) -> bool:
        self.report.checks.append(name)
        if failures:
            self.report.failures.extend(f"{name}: {reason}" for reason in failures)
            self.report.passed = False
        return not failures

    def trust(self, statement: str) -> None:
        self.report.solver_trusted.append(statement)


def _check_freeness(replay: _Replay, predicate: str, fam: Family, P: Poset, l: Optional[int]) -> None:
    if predicate == "p_free":
        found = embedding.find_copy(fam, P)
        replay.check("p_free", [] if found is None else [f"copy of {P.label()} at {found.to_json()}"])
    elif predicate == "trace_p_free":
        found = embedding.find_trace_violation(fam, P)
        replay.check("trace_p_free", [] if found is None else [f"trace copy of {P.label()} at {found.to_json()}"])
    elif predicate == "l_trace_p_free":
        if l is None:
            raise SchemaError("l_trace_p_free claims need 'l'")
        found = embedding.find_l_trace_violation(fam, P, l)
        replay.check(f"{l}_trace_p_free",
                     [] if found is None else [f"trace copy of {P.label()} at {found.to_json()}"])
    elif predicate == "la_d":
        if replay.check("downward_closed", [] if is_downward_closed(fam) else ["family is not downward closed"]):
            _check_freeness(replay, "p_free", fam, P, None)
    elif predicate == "la_u":
        if replay.check("upward_closed", [] if is_upward_closed(fam) else ["family is not upward closed"]):
            _check_freeness(replay, "p_free", fam, P, None)


def _check_arrow_counterexample(replay: _Replay, claim: Dict[str, Any], fam: Family) -> None:
    try:
        m, k, l = claim["m"], claim["k"], claim["l"]
    except KeyError as e:
        raise SchemaError(f"arrow_fails claims need {e}")
    failures = []
    if len(fam) != m:
        failures.append(f"downset has {len(fam)} members, claim says {m}")
    if not is_downward_closed(fam):
        failures.append("counterexample is not downward closed")
    # A downset's trace on X is its restriction to 2^X, so counting members inside X suffices.
    for X in embedding.subsets_of_size(fam.n, k):
        if sum(1 for bits in fam.members if not bits & ~X) >= l:
            failures.append(f"trace on {list(mask_elements(X))} has at least {l} members")
            break
    replay.check("arrow_counterexample", failures)


def _check_cycle_diamond(replay: _Replay, evidence: Dict[str, Any], fam: Family) -> None:
    chain_index = evidence.get("chain")
    if not isinstance(chain_index, int):
        raise SchemaError("cycle evidence needs an integer 'chain'")
    decomposition = symmetric_chain_decomposition(fam.n)
    G: LabeledChainGraph = chain_graph(fam, decomposition, chain_index)
    violation = check_cycle_label_condition(G)
    if not replay.check("cycle_violation", [] if violation is not None else [f"chain {chain_index} has no violating 4-cycle"]):
        return
    found = replay_cycle_violation(fam, G, violation)
    replay.check("cycle_replays_to_diamond",
                 [] if found is not None else [f"cycle {list(violation.cycle)} does not yield a diamond"])


def verify_certificate(cert: Certificate) -> VerificationReport:
    """
    Replay a certificate's evidence against its claim.

    Claim fields: "predicate" (one of CLAIM_PREDICATES), "poset", "n", and
    optionally "value" (claimed family size), "l", "exact" (the value is a
    maximum) and "m"/"k" for arrow claims. Evidence holds a "family" and,
    for containment claims, an embedding "witness" or trace "violation".

    Returns:
        VerificationReport; malformed documents fail with the schema problem
    """
    replay = _Replay()
    claim, evidence = cert.claim, cert.evidence
    try:
        predicate = claim.get("predicate")
        if predicate not in CLAIM_PREDICATES:
            raise SchemaError(f"unknown claim predicate {predicate!r}")
        fam = _family_of(evidence)
        n = claim.get("n", fam.n)
        if not replay.check("ground_set", [] if n == fam.n else [f"family lives on [{fam.n}], claim on [{n}]"]):
            return replay.report
        if "value" in claim:
            value = claim["value"]
            replay.check("size", [] if len(fam) == value else [f"family has {len(fam)} members, claim says {value}"])

        if predicate == "arrow_fails":
            _check_arrow_counterexample(replay, claim, fam)
            return replay.report
        if predicate == "cycle_diamond":
            _check_cycle_diamond(replay, evidence, fam)
            return replay.report

        P = _poset_of(claim)
        l = claim.get("l")
        if predicate == "contains":
            witness = embedding.EmbeddingWitness.from_json(evidence.get("witness") or {}, fam.n)
            replay.check("copy", witness.failures(P, fam))
        elif predicate == "trace_contains":
            violation = embedding.TraceViolation.from_json(evidence.get("violation") or {}, fam.n)
            replay.check("trace_copy", embedding.replay_violation(fam, P, violation))
        else:
            _check_freeness(replay, predicate, fam, P, l)
            if claim.get("exact"):
                replay.trust(f"no {predicate} family for {P.label()} over [{fam.n}] has {len(fam) + 1} members")
    except (SchemaError, UsageError) as e:
        replay.check("schema", [str(e)])
    return replay.report


def certificate_for_entry(entry: CatalogEntry, catalog: Catalog) -> Certificate:
    """
    Certificate of a stored value: its witness blob against the entry's predicate.

    Raises:
        IntegrityError: If the entry has no witness or the blob is corrupt
    """
    if entry.witness_ref is None:
        raise IntegrityError(f"entry {entry.key} has no witness to replay")
    fam = catalog.load_witness(entry.witness_ref)
    claim: Dict[str, Any] = {
        "predicate": _KIND_PREDICATE.get(entry.key.kind, entry.key.kind),
        "poset": entry.method.get("poset") or entry.poset_label,
        "n": entry.key.n,
        "value": entry.value,
        "exact": entry.status == "exact",
    }
    if entry.key.l is not None:
        claim["l"] = entry.key.l
    return Certificate(claim=claim, evidence={"family": fam.to_json()})


def verify_catalog(catalog: Catalog, logger: Optional[Logger] = None) -> List[Tuple[CatalogEntry, VerificationReport]]:
    """
    Replay every stored witness. Also checks that each entry's poset still
    hashes to its stored id.
    """
    results = []
    for entry in catalog.entries():
        report = VerificationReport(passed=True)
        if entry.key.kind == "arrow":
            report.solver_trusted.append(f"arrow value {entry.value} for {entry.poset_label}")
            results.append((entry, report))
            continue
        try:
            cert = certificate_for_entry(entry, catalog)
            report = verify_certificate(cert)
            recorded = _poset_of(cert.claim)
            report.checks.append("poset_id")
            if poset_id(recorded) != entry.key.poset_id:
                report.failures.append(f"poset_id: {recorded.label()} hashes to {poset_id(recorded)}")
                report.passed = False
        except IntegrityError as e:
            report = VerificationReport(passed=False, checks=["witness"], failures=[f"witness: {e}"])
        results.append((entry, report))
        if logger:
            logger.info("Catalog entry verified", kind=entry.key.kind, n=entry.key.n,
                        poset=entry.poset_label, passed=report.passed)
    return results


@dataclass
class ProbeReport:
    """
    Tr_{n-k}(n,P) at one n next to the predicted coefficient e(P) - k.

    ratio is the exact value divided by C(n, ⌊n/2⌋).
    """
    poset: str
    n: int
    k: int
    value: int
    status: str
    ratio: Fraction
    e: Optional[int]
    predicted: Optional[int]
    note: str = DATA_POINT_NOTE
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "poset": self.poset,
            "n": self.n,
            "k": self.k,
            "l": self.n - self.k,
            "value": self.value,
            "status": self.status,
            "ratio": str(self.ratio),
            "ratio_float": float(self.ratio),
            "e": self.e,
            "predicted_coefficient": self.predicted,
            "note": self.note,
            "detail": self.detail,
        }


def certified_e(P: Poset, n_max: int = 6) -> Tuple[Optional[int], Dict[str, Any]]:
    """e(P) over bands of 2^[2..n_max]; None when no band caps it."""
    try:
        report = param_e(P, range(-1, n_max), range(2, n_max + 1))
    except UncertifiedError as e:
        return None, {"e_lower_bound": e.lower_bound}
    return report.value, {"e_capping_band": report.detail["capping_band"]}


def probe_level_trace(P: Poset, n: int, k: int, budget: Optional[SearchBudget] = None,
                      logger: Optional[Logger] = None) -> ProbeReport:
    """
    Exact Tr_{n-k}(n,P) at small n, reported as a ratio to C(n, ⌊n/2⌋)
    against the coefficient e(P) - k the level-trace conjecture predicts
    (0 when k >= e(P)).

    Raises:
        UsageError: If k is not in 1..n-1
    """
    if k < 1 or k >= n:
        raise UsageError(f"k must be in 1..{n - 1}, got {k}")
    result = solve_tr_l(n, n - k, P, budget, logger)
    e, detail = certified_e(P)
    predicted = None if e is None else max(e - k, 0)
    report = ProbeReport(
        poset=P.label(), n=n, k=k, value=result.value, status=result.status,
        ratio=Fraction(result.value, math.comb(n, n // 2)), e=e, predicted=predicted, detail=detail,
    )
    if logger:
        logger.info("Level-trace probe", poset=P.label(), n=n, k=k, value=result.value,
                    ratio=float(report.ratio), predicted=predicted, note=DATA_POINT_NOTE)
    return report


def probe_butterfly_codim1(ns: Sequence[int], budget: Optional[SearchBudget] = None,
                           logger: Optional[Logger] = None) -> List[ProbeReport]:
    """Tr_{n-1}(n,B) next to the conjectured C(n, ⌊n/2⌋) for each n."""
    reports = []
    for n in ns:
        report = probe_level_trace(butterfly(), n, 1, budget, logger)
        report.detail["conjectured_value"] = math.comb(n, n // 2)
        report.detail["matches_conjecture"] = report.value == math.comb(n, n // 2)
        reports.append(report)
    return reports
