"""Truth-value conversions and atom-vector assembly."""

import math

import numpy as np
import pytest

from factlogic.templates import Predicate
from factlogic.truth import AtomVector, assemble_vector, truth_from_logits, truth_from_samples


class TestTruthFromLogits:
    def test_symmetry_gives_unknown(self):
        assert truth_from_logits(3.7, 3.7) == 0.0

    def test_three_to_one_preference(self):
        # direct high-precision evaluation: 2*3/(1+3) - 1 = 0.5
        assert truth_from_logits(math.log(3.0), 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_saturated_preference_no_overflow(self):
        assert truth_from_logits(1000.0, 0.0) == pytest.approx(1.0, abs=1e-12)
        assert truth_from_logits(0.0, 1000.0) == pytest.approx(-1.0, abs=1e-12)

    def test_non_finite_rejected(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError):
                truth_from_logits(bad, 0.0)
            with pytest.raises(ValueError):
                truth_from_logits(0.0, bad)

    def test_antisymmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            a, b = rng.uniform(-1e4, 1e4, size=2)
            assert truth_from_logits(a, b) == pytest.approx(-truth_from_logits(b, a), abs=1e-12)

    def test_monotone_in_affirmative_score(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            v_no = rng.uniform(-50, 50)
            a = rng.uniform(-30, 30)
            b = a + rng.uniform(1e-6, 10)
            low, high = truth_from_logits(a, v_no), truth_from_logits(b, v_no)
            assert high >= low
            if abs(a - v_no) < 20 and abs(b - v_no) < 20:  # away from float saturation
                assert high > low

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(2000):
            a, b = rng.uniform(-1e4, 1e4, size=2)
            assert -1.0 <= truth_from_logits(a, b) <= 1.0


class TestTruthFromSamples:
    def test_seven_three(self):
        assert truth_from_samples(7, 3) == pytest.approx(0.4, abs=1e-12)

    def test_no_answers_is_unknown(self):
        assert truth_from_samples(0, 0) == 0.0

    def test_split_vote_is_unknown(self):
        assert truth_from_samples(5, 5) == 0.0

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            truth_from_samples(-1, 3)
        with pytest.raises(ValueError):
            truth_from_samples(3, -1)

    def test_antisymmetry_and_range(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            m_yes, m_no = rng.integers(0, 100, size=2)
            value = truth_from_samples(int(m_yes), int(m_no))
            assert -1.0 <= value <= 1.0
            assert value == pytest.approx(-truth_from_samples(int(m_no), int(m_yes)), abs=1e-12)


def predicates(sizes):
    return [Predicate(id=i + 1, arity=1, semantics=f"p{i+1}", max_groundings=s) for i, s in enumerate(sizes)]


class TestAssembleVector:
    def test_padding_with_unknown(self):
        vector = assemble_vector([[0.4]], predicates([3]), seed=0)
        np.testing.assert_array_equal(vector.values, [0.4, 0.0, 0.0])

    def test_subset_selection_is_seeded(self):
        values = [[0.1, 0.2, 0.3, 0.4]]
        first = assemble_vector(values, predicates([2]), seed=5)
        second = assemble_vector(values, predicates([2]), seed=5)
        np.testing.assert_array_equal(first.values, second.values)
        assert first.values.shape == (2,)
        assert set(first.values) < {0.1, 0.2, 0.3, 0.4}

    def test_all_empty_gives_zero_vector(self):
        vector = assemble_vector([[], [], []], predicates([2, 1, 3]), seed=0)
        np.testing.assert_array_equal(vector.values, np.zeros(6))

    def test_groups_partition_vector(self):
        vector = assemble_vector([[1.0], [-1.0]], predicates([4, 2]), seed=0)
        assert vector.groups == ((0, 4), (4, 6))
        assert vector.group_sizes == (4, 2)
        assert vector.predicate_ids == (1, 2)

    def test_range_enforced(self):
        with pytest.raises(ValueError):
            AtomVector(values=np.array([1.5]), groups=((0, 1),), predicate_ids=(1,))
