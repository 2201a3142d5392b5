"""
Unit tests for the exact extremal solvers

Tests La, Tr and Tr_l solves on small ground sets, budget handling,
parallel determinism, re-verification and the unique-maximum identity.
"""

import math
from unittest.mock import Mock, patch

import pytest

from src import embedding, search
from src.errors import BudgetExhausted, CapabilityError, UsageError
from src.models import SearchBudget
from src.posets import butterfly, chain, diamond, edge_count, sperner_value, vee, wedge
from src.search import (
    ExtremalSearch,
    chain_bound,
    confirm_upper_bound,
    sandwich_report,
    sauer_cap,
    solve_la,
    solve_tr,
    solve_tr_l,
    unique_max_trace_value,
    universe_order,
)


class TestBounds:
    """Test suite for the pruning bounds"""

    def test_sauer_cap(self):
        """Test Σ_{i<=k} C(n,i) and the empty cap"""
        assert sauer_cap(4, 2) == 11
        assert sauer_cap(5, 0) == 1
        assert sauer_cap(5, -1) == 0

    def test_chain_bound_with_cap_one_is_the_middle_binomial(self):
        """Test that one member per chain gives C(n, n/2)"""
        for n in range(1, 7):
            assert chain_bound(n, 1) == math.comb(n, n // 2)

    def test_chain_bound_never_exceeds_the_cube(self):
        """Test that a large cap counts every subset"""
        assert chain_bound(4, 10) == 16

    def test_universe_order_is_a_permutation(self):
        """Test that the member order covers 2^[n] once"""
        for kind in ("la", "tr", "tr_l"):
            assert sorted(universe_order(kind, 4)) == list(range(16))


class TestLaSolves:
    """Test suite for La(n,P)"""

    @pytest.mark.parametrize("n, P, k", [
        (4, chain(2), 1),
        (5, chain(2), 1),
        (4, chain(3), 2),
        (3, butterfly(), 2),
    ], ids=["P2-4", "P2-5", "P3-4", "B-3"])
    def test_la_matches_sperner_values(self, n, P, k):
        """Test La against the sum of the k largest binomial coefficients"""
        result = solve_la(n, P)

        assert result.is_exact
        assert result.value == sperner_value(n, k)
        assert len(result.witness) == result.value
        assert embedding.is_p_free(result.witness, P)

    def test_la_beyond_the_envelope_is_refused(self):
        """Test that La searches stop at n = 7"""
        with pytest.raises(CapabilityError):
            solve_la(8, chain(2))

    def test_exact_symmetry_beyond_eight_is_refused(self):
        """Test that the S_n table is not built for n = 9"""
        with pytest.raises(CapabilityError):
            solve_tr(9, chain(2))


class TestTraceSolves:
    """Test suite for Tr(n,P) and Tr_l(n,P)"""

    @pytest.mark.parametrize("n, expected", [(3, 6), (4, 7)])
    def test_butterfly_trace_values(self, n, expected):
        """Test Tr(3,B) = 6 and Tr(4,B) = 7"""
        result = solve_tr(n, butterfly())

        assert result.is_exact
        assert result.value == expected
        assert embedding.is_trace_p_free(result.witness, butterfly())
        assert result.bounds["sauer"] == sauer_cap(n, 2)

    @pytest.mark.slow
    def test_butterfly_trace_value_at_five(self):
        """Test Tr(5,B) = 8"""
        result = solve_tr(5, butterfly(), SearchBudget(time_limit=1800))

        assert result.is_exact
        assert result.value == 8

    @pytest.mark.parametrize("symmetry", ["heuristic", "off"])
    def test_symmetry_modes_agree(self, symmetry):
        """Test that the dihedral and unreduced searches reach the same value"""
        result = solve_tr(4, butterfly(), SearchBudget(symmetry=symmetry))

        assert result.value == 7
        assert result.symmetry == symmetry

    def test_full_trace_is_la(self):
        """Test Tr_n(n,P) = La(n,P) for the butterfly at n = 4"""
        result = solve_tr_l(4, 4, butterfly())

        assert result.is_exact
        assert result.value == sperner_value(4, 2)
        assert result.l == 4

    def test_l_out_of_range_is_a_usage_error(self):
        """Test the Tr_l range check"""
        with pytest.raises(UsageError):
            solve_tr_l(4, 5, butterfly())
        with pytest.raises(UsageError):
            solve_tr_l(4, 0, butterfly())

    def test_parallel_solve_matches_sequential(self):
        """Test that two workers return the sequential value and witness"""
        sequential = solve_tr(4, butterfly(), SearchBudget(workers=1))
        parallel = solve_tr(4, butterfly(), SearchBudget(workers=2))

        assert parallel.status == "exact"
        assert parallel.value == sequential.value
        assert parallel.witness == sequential.witness

    def test_search_logs_its_outcome(self):
        """Test that the solver reports the finished search"""
        # Arrange
        logger = Mock()
        solver = ExtremalSearch(SearchBudget(), logger)

        # Act
        result = solver.solve_tr(3, diamond())

        # Assert
        messages = [c.args[0] for c in logger.info.call_args_list]
        assert "Starting solve" in messages
        assert "Search finished" in messages
        assert result.value == 4


class TestTraceMonotonicity:
    """Test suite for Tr_k(n,P) <= Tr_l(n,P) once k reaches E(P)"""

    def trace_values(self, n, P):
        return {l: solve_tr_l(n, l, P).value for l in range(edge_count(P), n + 1)}

    def assert_monotone(self, n, P):
        values = self.trace_values(n, P)
        full = solve_tr(n, P).value

        for k in values:
            for l in values:
                if k <= l:
                    assert values[k] <= values[l], (k, l, values)
            assert full <= values[k]

    def test_butterfly_at_four(self):
        """Test Tr(4,B) <= Tr_4(4,B) with E(B) = 4"""
        self.assert_monotone(4, butterfly())

    def test_vee_at_four(self):
        """Test the chain of l-trace values of ∨_2 from l = 2"""
        self.assert_monotone(4, vee(2))

    @pytest.mark.slow
    def test_butterfly_at_five(self):
        """Test Tr_4(5,B) <= Tr_5(5,B) and Tr(5,B) below both"""
        self.assert_monotone(5, butterfly())


class TestBudgets:
    """Test suite for budget exhaustion"""

    def setup_method(self):
        search._CAP_CACHE.clear()

    def test_node_limit_returns_a_partial_result(self):
        """Test that a stopped search is never reported exact"""
        with patch("src.search.SYNC_EVERY", 1):
            result = solve_tr(4, butterfly(), SearchBudget(node_limit=3))

        assert not result.is_exact
        assert result.status in ("lower_bound_only", "timeout")

    def test_stopped_reverification_raises(self):
        """Test that confirm_upper_bound refuses to answer without finishing"""
        with patch("src.search.SYNC_EVERY", 1):
            with pytest.raises(BudgetExhausted):
                confirm_upper_bound("tr", 4, butterfly(), 7, budget=SearchBudget(node_limit=2))


class TestReverification:
    """Test suite for confirm_upper_bound"""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_true_maximum_is_confirmed(self, seed):
        """Test that no 7-member trace B-free family exists over [3]"""
        assert confirm_upper_bound("tr", 3, butterfly(), 6, seed=seed)

    def test_understated_maximum_is_caught(self):
        """Test that claiming Tr(3,B) <= 5 is refuted"""
        assert confirm_upper_bound("tr", 3, butterfly(), 5) is False

    def test_unknown_kind_is_a_usage_error(self):
        """Test the kind check"""
        with pytest.raises(UsageError):
            confirm_upper_bound("la_d", 3, butterfly(), 5)


class TestUniqueMaxIdentity:
    """Test suite for Tr(n,P) of posets with a unique maximum"""

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_diamond_and_wedge_have_value_n_plus_one(self, n):
        """Test Tr(n,D) = Tr(n,∧_2) = n + 1"""
        for P in (diamond(), wedge(2)):
            result = unique_max_trace_value(n, P)

            assert result.value == n + 1
            assert result.bounds["x"] == 1

    @pytest.mark.parametrize("n", [3, 4])
    def test_identity_agrees_with_the_search(self, n):
        """Test the closed form against an exact solve"""
        assert solve_tr(n, diamond()).value == unique_max_trace_value(n, diamond()).value

    def test_identity_needs_a_unique_maximum(self):
        """Test that ∨_2 is refused"""
        with pytest.raises(UsageError):
            unique_max_trace_value(4, vee(2))


class TestSandwich:
    """Test suite for the sandwich report"""

    def test_butterfly_at_three(self):
        """Test lower <= La_D <= Tr <= upper for B over [3]"""
        report = sandwich_report(3, butterfly())

        assert report.holds
        assert report.exact
        assert report.lower == 4
        assert report.la_d == 5
        assert report.la_u == 5
        assert report.tr == 6
        assert report.upper == 7
        assert report.to_dict()["holds"] is True
