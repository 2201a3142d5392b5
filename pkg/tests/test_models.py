"""
Unit tests for data models
"""

import pytest

from src.core_sets import Family, levels_at_most
from src.errors import UsageError
from src.models import (
    ArrowResult,
    CatalogEntry,
    CatalogKey,
    ConstructionReport,
    ExtremalResult,
    SearchBudget,
    VerificationReport,
)


def test_search_budget_defaults():
    """Test that SearchBudget starts sequential with exact symmetry"""
    budget = SearchBudget()

    assert budget.workers == 1
    assert budget.symmetry == "exact"
    assert budget.time_limit == 600.0


@pytest.mark.parametrize("kwargs", [
    {"time_limit": 0},
    {"node_limit": -5},
    {"workers": 0},
    {"symmetry": "orbits"},
])
def test_search_budget_rejects_bad_limits(kwargs):
    """Test that non-positive limits and unknown symmetry modes raise"""
    with pytest.raises(UsageError):
        SearchBudget(**kwargs)


def test_extremal_result_to_dict():
    """Test that an exact result serializes its witness and bounds"""
    result = ExtremalResult(
        kind="tr", n=3, poset_id="abc", poset_label="butterfly", value=4, status="exact",
        witness=levels_at_most(3, 1), nodes=12, bounds={"sauer": 7}, elapsed=0.12345,
    )

    doc = result.to_dict()

    assert result.is_exact
    assert doc["poset"] == "butterfly"
    assert doc["witness"] == levels_at_most(3, 1).to_json()
    assert doc["l"] is None
    assert doc["elapsed"] == 0.123


def test_timeout_result_has_no_witness():
    """Test a result with nothing found"""
    result = ExtremalResult(
        kind="la", n=7, poset_id="abc", poset_label="diamond", value=0, status="timeout",
        witness=None, nodes=10,
    )

    assert not result.is_exact
    assert result.to_dict()["witness"] is None


def test_arrow_result_to_dict():
    """Test that a counterexample downset is serialized"""
    result = ArrowResult(3, 2, 2, 4, False, Family.from_sets(3, [[], [1]]), "shattering")

    doc = result.to_dict()

    assert doc["holds"] is False
    assert doc["counterexample"] == {"n": 3, "sets": [[], [1]]}
    assert doc["downsets_checked"] == 0


def test_construction_report_counts_the_family():
    """Test that the report carries the family size next to the claim"""
    report = ConstructionReport(
        name="levels", params={"n": 3, "j": -1, "k": 2}, family=levels_at_most(3, 1),
        claimed_size=4, predicate=None, passed=True,
    )

    doc = report.to_dict()

    assert doc["size"] == 4
    assert doc["failures"] == []
    assert doc["violation"] is None


def test_catalog_key_orders_missing_l_first():
    """Test the sort tuple of a key without l"""
    assert CatalogKey("tr", "abc", 5).as_tuple() == ("tr", "abc", 5, -1)
    assert CatalogKey("tr_l", "abc", 5, 3).as_tuple() < CatalogKey("tr_l", "abc", 5, 4).as_tuple()


def test_catalog_entry_flattens_its_key():
    """Test that to_dict puts the key fields at the top level"""
    entry = CatalogEntry(
        key=CatalogKey("la", "abc", 4), poset_label="chain(2)", value=6, status="exact",
        witness_ref=None, method={}, tool_version="0.1.0", timestamp="2026-01-01T00:00:00Z",
    )

    doc = entry.to_dict()

    assert doc["kind"] == "la"
    assert doc["poset_id"] == "abc"
    assert doc["n"] == 4
    assert doc["poset"] == "chain(2)"


def test_verification_report_starts_empty():
    """Test the default lists"""
    report = VerificationReport(passed=True)

    assert report.to_dict() == {"passed": True, "checks": [], "failures": [], "solver_trusted": []}
