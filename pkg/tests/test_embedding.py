"""
Unit tests for copy search and the freeness predicates

Tests copies of posets in families, l-trace and trace predicates (including
the reduced sweep against the full one), and shattering.
"""

import itertools
import math
import random
from unittest.mock import patch

import pytest
from hypothesis import given, settings, strategies as st

from src import embedding
from src.core_sets import Family, level_family, levels_at_most, levels_between, power_set, trace_family
from src.embedding import EmbeddingWitness, TraceViolation
from src.errors import IntegrityError, UsageError
from src.posets import Poset, butterfly, chain, diamond, edge_count, k_rs, vee, wedge

SWEEP_POSETS = [butterfly(), diamond(), k_rs(2, 2), vee(2), wedge(2)]


@st.composite
def families(draw, min_n=2, max_n=5):
    n = draw(st.integers(min_value=min_n, max_value=max_n))
    masks = draw(st.sets(st.integers(min_value=0, max_value=(1 << n) - 1), max_size=1 << n))
    return Family.of(n, masks)


class TestCopies:
    """Test suite for copy search in a family"""

    def test_butterfly_in_the_three_cube(self):
        """Test that 2^[3] contains B and the witness checks out"""
        fam = power_set(3)

        witness = embedding.find_copy(fam, butterfly())

        assert witness is not None
        assert witness.failures(butterfly(), fam) == []

    def test_two_levels_are_butterfly_free(self):
        """Test that C([5],2) ∪ C([5],3) has no butterfly"""
        assert embedding.is_p_free(levels_between(5, 2, 3), butterfly())

    def test_a_level_has_no_two_chain(self):
        """Test that an antichain is P_2-free"""
        assert embedding.is_p_free(level_family(5, 2), chain(2))

    def test_three_levels_contain_a_butterfly(self):
        """Test that C([5],1..3) contains B"""
        assert not embedding.is_p_free(levels_between(5, 1, 3), butterfly())

    def test_copies_are_not_induced(self):
        """Test that a 3-chain also hosts the 2-element antichain"""
        fam = Family.from_sets(3, [[], [1], [1, 2]])
        antichain = Poset(2, frozenset())

        assert embedding.find_copy(fam, antichain) is not None

    def test_family_smaller_than_poset_is_free(self):
        """Test the cardinality shortcut"""
        assert embedding.find_copy(Family.from_sets(3, [[], [1], [2]]), butterfly()) is None

    def test_find_copy_using_forces_a_member(self):
        """Test that the forced member appears in the returned copy"""
        fam = power_set(2)

        witness = embedding.find_copy_using(fam, chain(2), 0b11)

        assert witness is not None
        assert 0b11 in witness.assignment
        assert witness.is_valid(chain(2), fam)

    def test_find_copy_using_rejects_non_members(self):
        """Test the membership check"""
        with pytest.raises(UsageError):
            embedding.find_copy_using(Family.from_sets(3, [[1]]), chain(1), 0b10)

    def test_witness_failures_name_the_broken_relation(self):
        """Test that an invalid witness lists what is wrong"""
        witness = EmbeddingWitness((0b01, 0b10), 2)

        failures = witness.failures(chain(2))

        assert len(failures) == 1
        assert "not a proper subset" in failures[0]

    def test_witness_must_be_injective(self):
        """Test that repeated images are reported"""
        witness = EmbeddingWitness((0b01, 0b01), 2)

        assert any("injective" in f for f in witness.failures(vee(1)))

    def test_witness_json_round_trip(self):
        """Test the {"map": [...]} document"""
        witness = embedding.find_copy(power_set(3), diamond())

        assert EmbeddingWitness.from_json(witness.to_json(), 3) == witness


class TestTracePredicates:
    """Test suite for l-trace and trace freeness"""

    def test_two_levels_of_four_hold_a_butterfly_in_a_trace(self):
        """Test a B-free family whose trace on a 3-set contains B"""
        fam = levels_between(4, 2, 3)

        violation = embedding.find_l_trace_violation(fam, butterfly(), 3)

        assert embedding.is_p_free(fam, butterfly())
        assert violation is not None
        assert violation.l == 3
        assert embedding.replay_violation(fam, butterfly(), violation) == []

    def test_violation_json_round_trip(self):
        """Test that a TraceViolation survives its JSON form and still replays"""
        fam = levels_between(4, 2, 3)
        violation = embedding.find_trace_violation(fam, butterfly())

        parsed = TraceViolation.from_json(violation.to_json(), 4)

        assert parsed == violation
        assert embedding.replay_violation(fam, butterfly(), parsed) == []

    def test_tampered_violation_fails_replay(self):
        """Test that a preimage outside the family is reported"""
        fam = levels_between(4, 2, 3)
        violation = embedding.find_trace_violation(fam, butterfly())
        broken = TraceViolation(violation.L, 4, violation.witness, (0,) + violation.preimages[1:])

        assert embedding.replay_violation(fam, butterfly(), broken) != []

    def test_l_must_fit_the_ground_set(self):
        """Test the l range check"""
        with pytest.raises(UsageError):
            embedding.find_l_trace_violation(power_set(3), butterfly(), 4)
        with pytest.raises(UsageError):
            embedding.find_l_trace_violation(power_set(3), butterfly(), 0)

    def test_bottom_two_levels_are_trace_diamond_free(self):
        """Test that C([5], <= 1) is trace D-free"""
        assert embedding.is_trace_p_free(levels_at_most(5, 1), diamond())
        assert not embedding.is_trace_p_free(levels_at_most(5, 2), diamond())

    def test_sweep_levels(self):
        """Test the decisive trace sizes for B and P_2"""
        assert embedding.trace_sweep_levels(butterfly(), 5) == [3, 2]
        assert embedding.trace_sweep_levels(butterfly(), 2) == [2]
        assert embedding.trace_sweep_levels(chain(2), 6) == [1]

    @settings(max_examples=200, deadline=None)
    @given(fam=families(max_n=5), index=st.integers(min_value=0, max_value=len(SWEEP_POSETS) - 1))
    def test_reduced_sweep_agrees_with_full_sweep(self, fam, index):
        """Test is_trace_p_free against the all-l predicate"""
        P = SWEEP_POSETS[index]

        assert embedding.is_trace_p_free(fam, P) == embedding.is_trace_p_free_naive(fam, P)

    @settings(max_examples=200, deadline=None)
    @given(fam=families(min_n=3, max_n=6), index=st.integers(min_value=0, max_value=len(SWEEP_POSETS) - 1))
    def test_trace_freeness_is_monotone_above_the_edge_count(self, fam, index):
        """Test that k-trace P-free implies l-trace P-free for E(P) <= k <= l"""
        P = SWEEP_POSETS[index]
        E = edge_count(P)
        free = [embedding.is_l_trace_p_free(fam, P, l) if l >= E else None for l in range(fam.n + 1)]

        for k, l in itertools.combinations(range(max(E, 1), fam.n + 1), 2):
            if free[k]:
                assert free[l], f"{P.label()}: {k}-trace free but not {l}-trace free"

    def test_debug_sweep_cross_check_raises_on_disagreement(self, monkeypatch):
        """Test that the debug switch turns a sweep mismatch into IntegrityError"""
        monkeypatch.setenv("TRACEPOSET_DEBUG_SWEEP", "true")

        with patch("src.embedding.find_trace_violation_naive", return_value=None):
            with pytest.raises(IntegrityError, match="disagrees"):
                embedding.find_trace_violation(power_set(3), butterfly())

    def test_debug_sweep_is_silent_when_both_agree(self, monkeypatch):
        """Test the cross-check on a consistent family"""
        monkeypatch.setenv("TRACEPOSET_DEBUG_SWEEP", "1")

        assert embedding.find_trace_violation(levels_at_most(4, 1), diamond()) is None

    @pytest.mark.slow
    @pytest.mark.parametrize("P", [butterfly(), diamond()], ids=["butterfly", "diamond"])
    def test_reduced_sweep_agrees_on_every_family_over_four(self, P):
        """Test the reduced sweep on all 65536 families over [4]"""
        disagreements = 0
        for code in range(1 << 16):
            fam = Family(4, tuple(bits for bits in range(16) if code >> bits & 1))
            if embedding.is_trace_p_free(fam, P) != embedding.is_trace_p_free_naive(fam, P):
                disagreements += 1

        assert disagreements == 0

    @pytest.mark.slow
    def test_reduced_sweep_agrees_on_random_families_over_seven(self):
        """Test the reduced sweep on 10^4 random families over [7]"""
        rng = random.Random(7)
        for _ in range(10_000):
            size = rng.randint(4, 24)
            fam = Family.of(7, rng.sample(range(128), size))
            for P in (butterfly(), diamond()):
                assert embedding.is_trace_p_free(fam, P) == embedding.is_trace_p_free_naive(fam, P)


class TestShattering:
    """Test suite for shattered sets and VC dimension"""

    def test_bottom_levels_shatter_nothing_larger(self):
        """Test that C([n], <= k-1) shatters no k-set"""
        for n, k in [(4, 2), (5, 3), (6, 2)]:
            assert embedding.find_shattered_set(levels_at_most(n, k - 1), k) is None

    def test_shattered_set_is_lexicographically_first(self):
        """Test which 2-set is reported"""
        fam = Family.from_sets(3, [[], [2], [3], [2, 3]])

        X = embedding.find_shattered_set(fam, 2)

        assert X.elements() == (2, 3)
        assert len(trace_family(fam, X)) == 4

    def test_vc_dimension(self):
        """Test vc_dim on standard families"""
        assert embedding.vc_dim(power_set(3)) == 3
        assert embedding.vc_dim(levels_at_most(5, 2)) == 2
        assert embedding.vc_dim(Family.from_sets(3, [[1]])) == 0
        assert embedding.vc_dim(Family.empty(3)) == -1

    @settings(max_examples=100, deadline=None)
    @given(data=st.data())
    def test_large_families_shatter(self, data):
        """Test that more than Σ_{i<k} C(n,i) members force a shattered k-set"""
        n = data.draw(st.integers(min_value=2, max_value=6))
        k = data.draw(st.integers(min_value=1, max_value=n))
        threshold = sum(math.comb(n, i) for i in range(k))
        order = data.draw(st.permutations(list(range(1 << n))))
        masks = order[:threshold + 1]

        assert embedding.find_shattered_set(Family.of(n, masks), k) is not None
