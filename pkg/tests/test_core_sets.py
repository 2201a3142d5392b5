"""
Unit tests for the set-family algebra

Covers Family construction and JSON forms, traces, compressions, closures,
and the canonical forms used for isomorph rejection.
"""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from src.core_sets import (
    Family,
    SubsetMask,
    apply_permutation,
    canonical_form,
    canonical_form_info,
    closure_down,
    closure_up,
    compress_to_downset,
    dihedral_table,
    down_compress,
    is_downward_closed,
    is_lex_min_in_orbit,
    is_upward_closed,
    level_family,
    levels_at_most,
    mask_elements,
    mask_from_elements,
    orbit_size,
    permutation_table,
    power_set,
    shadow,
    trace_family,
    trace_set,
)
from src.errors import SchemaError, UsageError


@st.composite
def families(draw, min_n=1, max_n=5):
    n = draw(st.integers(min_value=min_n, max_value=max_n))
    masks = draw(st.sets(st.integers(min_value=0, max_value=(1 << n) - 1), max_size=1 << n))
    return Family.of(n, masks)


class TestFamily:
    """Test suite for Family construction and serialization"""

    def test_of_sorts_and_collapses_duplicates(self):
        """Test that Family.of accepts any order and repeated masks"""
        fam = Family.of(3, [5, 1, 5, 0])

        assert fam.members == (0, 1, 5)
        assert len(fam) == 3

    def test_direct_construction_rejects_unsorted_members(self):
        """Test that the raw constructor insists on strictly increasing masks"""
        with pytest.raises(UsageError, match="strictly increasing"):
            Family(3, (2, 1))

    def test_member_outside_ground_set_is_rejected(self):
        """Test that masks wider than n bits are refused"""
        with pytest.raises(UsageError):
            Family.of(2, [0b100])

    def test_ground_set_size_is_bounded(self):
        """Test that n must lie in 1..30"""
        with pytest.raises(UsageError):
            Family.empty(0)
        with pytest.raises(UsageError):
            Family.empty(31)

    def test_from_sets_uses_one_based_elements(self):
        """Test that element 1 is bit 0"""
        fam = Family.from_sets(4, [[1, 2], [4], []])

        assert fam.members == (0b0000, 0b0011, 0b1000)
        assert fam.sets() == [[], [1, 2], [4]]

    def test_from_sets_rejects_elements_beyond_n(self):
        """Test that element n+1 raises"""
        with pytest.raises(UsageError):
            Family.from_sets(3, [[4]])

    def test_json_forms_parse_to_the_same_family(self):
        """Test that the sets and masks documents describe one family"""
        fam = Family.from_sets(4, [[1], [2, 3], [1, 2, 3, 4]])

        assert Family.from_json(fam.to_json()) == fam
        assert Family.from_json(fam.to_json_masks()) == fam

    @pytest.mark.parametrize("doc", [
        {"sets": [[1]]},
        {"n": "4", "sets": []},
        {"n": 4},
        {"n": 4, "masks": ["zz"]},
        [1, 2],
    ])
    def test_malformed_documents_raise_schema_error(self, doc):
        """Test that documents matching neither form raise SchemaError"""
        with pytest.raises(SchemaError):
            Family.from_json(doc)

    def test_subset_mask_round_trips_elements(self):
        """Test SubsetMask element conversion"""
        X = SubsetMask.from_elements(5, [2, 5])

        assert X.bits == 0b10010
        assert X.elements() == (2, 5)
        assert len(X) == 2
        assert mask_elements(mask_from_elements([3, 1])) == (1, 3)


class TestTraces:
    """Test suite for trace operators"""

    def test_trace_collapses_duplicates(self):
        """Test that traces identical on X count once"""
        fam = Family.from_sets(3, [[1, 2], [2, 3], [1, 3], [3]])

        traced = trace_family(fam, mask_from_elements([1, 2]))

        assert traced.sets() == [[], [1], [2], [1, 2]]

    def test_trace_set_requires_matching_ground_sets(self):
        """Test that traces across different ground sets raise"""
        with pytest.raises(UsageError, match="ground sets differ"):
            trace_set(SubsetMask(1, 3), SubsetMask(1, 4))

    def test_trace_on_full_set_is_identity(self):
        """Test F|_[n] = F"""
        fam = Family.from_sets(4, [[1], [2, 4], [1, 2, 3]])

        assert trace_family(fam, (1 << 4) - 1) == fam

    @given(fam=families(), data=st.data())
    def test_trace_composes(self, fam, data):
        """Test (F|_X)|_Y = F|_(X ∩ Y)"""
        X = data.draw(st.integers(min_value=0, max_value=(1 << fam.n) - 1))
        Y = data.draw(st.integers(min_value=0, max_value=(1 << fam.n) - 1))

        assert trace_family(trace_family(fam, X), Y) == trace_family(fam, X & Y)


class TestCompressions:
    """Test suite for down-compression and closures"""

    def test_down_compress_keeps_existing_sets(self):
        """Test that D_i leaves F alone when F minus i is already present"""
        fam = Family.from_sets(3, [[1], [1, 2], [2]])

        compressed = down_compress(fam, 1)

        # {1} -> ∅; {1,2} stays because {2} is present
        assert compressed.sets() == [[], [2], [1, 2]]

    def test_down_compress_rejects_elements_outside(self):
        """Test the element range check"""
        with pytest.raises(UsageError):
            down_compress(Family.empty(3), 4)

    @given(fam=families(), i=st.integers(min_value=1, max_value=5))
    def test_down_compress_preserves_size(self, fam, i):
        """Test |D_i(F)| = |F|"""
        if i > fam.n:
            return
        assert len(down_compress(fam, i)) == len(fam)

    @given(fam=families())
    def test_compress_to_downset_reaches_a_downset_of_the_same_size(self, fam):
        """Test that iterated compression ends in a downset"""
        result = compress_to_downset(fam)

        assert len(result) == len(fam)
        assert is_downward_closed(result)

    def test_closures(self):
        """Test closure_down and closure_up of a single set"""
        fam = Family.from_sets(3, [[1, 2]])

        assert closure_down(fam).sets() == [[], [1], [2], [1, 2]]
        assert closure_up(fam).sets() == [[1, 2], [1, 2, 3]]
        assert is_upward_closed(closure_up(fam))

    def test_shadow_of_a_level_is_the_level_below(self):
        """Test ∂C([4],2) = C([4],1)"""
        assert shadow(level_family(4, 2)) == level_family(4, 1)

    def test_levels(self):
        """Test level family sizes"""
        assert len(levels_at_most(4, 1)) == 5
        assert len(power_set(3)) == 8
        with pytest.raises(UsageError):
            level_family(3, 4)


class TestCanonicalForms:
    """Test suite for orbit computations"""

    def test_permutation_table_shape(self):
        """Test that the S_n action table has n! rows and 2^n columns"""
        table = permutation_table(3)

        assert table.shape == (6, 8)
        assert not table.flags.writeable

    def test_dihedral_table_has_two_n_rows(self):
        """Test the rotation and reflection table"""
        assert dihedral_table(5).shape == (10, 32)

    def test_orbit_size_of_a_singleton(self):
        """Test that {{1}} has n images"""
        assert orbit_size(Family.from_sets(4, [[1]])) == 4
        assert orbit_size(power_set(3)) == 1

    def test_canonical_form_is_lexicographically_smallest(self):
        """Test the canonical representative of a single 2-set"""
        fam = Family.from_sets(4, [[3, 4]])

        form, exact = canonical_form_info(fam)

        assert exact is True
        assert form.sets() == [[1, 2]]

    def test_canonical_form_above_eight_is_heuristic(self):
        """Test that large ground sets report an inexact form"""
        _, exact = canonical_form_info(Family.from_sets(9, [[1, 9]]))

        assert exact is False

    @settings(max_examples=50, deadline=None)
    @given(fam=families(max_n=5), data=st.data())
    def test_canonical_form_is_constant_on_orbits(self, fam, data):
        """Test canonical_form(π F) = canonical_form(F)"""
        perm = data.draw(st.permutations(list(range(fam.n))))

        assert canonical_form(apply_permutation(fam, perm)) == canonical_form(fam)

    def test_lex_min_in_orbit(self):
        """Test the orderly-generation canonicity check"""
        assert is_lex_min_in_orbit([0b001], 3)
        assert not is_lex_min_in_orbit([0b100], 3)
        assert is_lex_min_in_orbit([0b001], 3, table=dihedral_table(3))
        assert is_lex_min_in_orbit([], 3)

    def test_every_orbit_has_exactly_one_canonical_member_tuple(self):
        """Test that the lex-min check accepts one tuple per orbit of 2-member families"""
        accepted = [
            pair for pair in itertools.combinations(range(8), 2)
            if is_lex_min_in_orbit(list(pair), 3)
        ]
        forms = {canonical_form(Family(3, pair)) for pair in itertools.combinations(range(8), 2)}

        assert len(accepted) == len(forms)

    def test_apply_permutation_rejects_non_permutations(self):
        """Test the permutation check"""
        with pytest.raises(UsageError):
            apply_permutation(Family.from_sets(3, [[1]]), [0, 0, 1])
