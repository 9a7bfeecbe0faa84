"""Sparsifier tests: brute-force oracles, cardinality, selection properties."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsparse.sparsify import (SparseUpdate, SparsityPolicy, densify,
                                random_sparsify, retained_count, sparsify,
                                threshold_sparsify, top_k_sparsify)


def sort_oracle_indices(v, m):
    """Reference top-k: stable magnitude-descending full sort, first m positions."""
    order = sorted(range(len(v)), key=lambda j: (-abs(v[j]), j))
    return sorted(order[:m])


finite_vectors = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=64),
    min_size=1, max_size=64,
).map(np.array)


class TestRetainedCount:
    def test_documented_rule(self):
        assert retained_count(0.5, 4) == 2
        assert retained_count(0.25, 10) == 3  # ceil(2.5)
        assert retained_count(1.0, 7) == 7
        assert retained_count(1e-9, 5) == 1  # floor of one entry

    def test_decimal_rates_do_not_round_up(self):
        # 0.1 * 1000 and 0.2 * 100 are slightly above the integer in binary
        assert retained_count(0.1, 1000) == 100
        assert retained_count(0.2, 100) == 20
        assert retained_count(0.3, 10) == 3

    def test_rate_bounds(self):
        with pytest.raises(ValueError):
            retained_count(0.0, 10)
        with pytest.raises(ValueError):
            retained_count(1.5, 10)


class TestTopK:
    def test_forced_magnitude_order(self):
        u = top_k_sparsify(np.array([0.5, -2.0, 0.1, 1.5]), 0.5)
        assert list(u.indices) == [1, 3]
        assert list(u.values) == [-2.0, 1.5]

    def test_full_rate_round_trips(self):
        v = np.random.default_rng(0).standard_normal(17)
        u = top_k_sparsify(v, 1.0)
        assert len(u) == 17
        assert np.array_equal(densify(u), v)

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(42)
        v = rng.standard_normal(1000)
        u = top_k_sparsify(v, 0.1)
        assert list(u.indices) == sort_oracle_indices(v, 100)

    def test_magnitude_ties_break_low_index(self):
        u = top_k_sparsify(np.array([1.0, -1.0, 1.0]), 0.6)  # m = 2
        assert list(u.indices) == [0, 1]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            top_k_sparsify(np.array([1.0, np.nan]), 0.5)
        with pytest.raises(ValueError):
            top_k_sparsify(np.array([1.0]), 0.0)
        with pytest.raises(ValueError):
            top_k_sparsify(np.array([1.0]), 1.0001)

    @given(finite_vectors, st.floats(0.01, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_cardinality_and_oracle_property(self, v, rate):
        u = top_k_sparsify(v, rate)
        m = retained_count(rate, len(v))
        assert len(u) == m
        assert list(u.indices) == sort_oracle_indices(v, m)

    @given(finite_vectors, st.floats(0.01, 1.0), st.integers(-10, 10))
    @settings(max_examples=100, deadline=None)
    def test_scale_equivariant_selection(self, v, rate, exponent):
        # power-of-two scales are exact, so magnitude order is preserved
        # even for vectors with near-tied entries
        base = top_k_sparsify(v, rate)
        scaled = top_k_sparsify(float(2.0 ** exponent) * v, rate)
        assert np.array_equal(base.indices, scaled.indices)

    def test_scale_equivariance_nontrivial_factor(self):
        v = np.array([3.0, -7.5, 0.25, 5.0, -1.0])
        for c in (0.1, 3.7, 250.0):
            assert np.array_equal(top_k_sparsify(v, 0.4).indices,
                                  top_k_sparsify(c * v, 0.4).indices)

    def test_norm_dominance_exhaustive(self):
        """Top-k maximizes retained L2 norm over all m-subsets (d <= 12)."""
        rng = np.random.default_rng(7)
        for d, m in ((8, 3), (12, 5), (10, 1)):
            v = rng.standard_normal(d)
            u = top_k_sparsify(v, m / d)
            assert len(u) == m
            kept = np.sum(v[u.indices] ** 2)
            best = max(sum(v[list(s)] ** 2)
                       for s in itertools.combinations(range(d), m))
            assert kept == pytest.approx(best, rel=1e-12)


class TestThreshold:
    def test_boundary_inclusive(self):
        u = threshold_sparsify(np.array([0.05, -0.3, 0.2]), 0.2)
        assert list(u.indices) == [1, 2]

    def test_zero_tau_keeps_all(self):
        v = np.array([0.0, -1.0, 2.0])
        u = threshold_sparsify(v, 0.0)
        assert len(u) == 3
        assert np.array_equal(densify(u), v)

    def test_may_keep_nothing(self):
        u = threshold_sparsify(np.array([0.1, -0.1]), 5.0)
        assert len(u) == 0
        assert np.array_equal(densify(u), np.zeros(2))

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            threshold_sparsify(np.array([1.0]), -0.1)

    @given(finite_vectors, st.floats(0.0, 10.0))
    @settings(max_examples=200, deadline=None)
    def test_matches_linear_scan_oracle(self, v, tau):
        u = threshold_sparsify(v, tau)
        expected = [j for j in range(len(v)) if abs(v[j]) >= tau]
        assert list(u.indices) == expected


class TestRandom:
    def test_full_rate_identity(self):
        v = np.random.default_rng(3).standard_normal(9)
        u = random_sparsify(v, 1.0, rng_seed=5)
        assert np.array_equal(densify(u), v)

    def test_same_seed_same_subset(self):
        v = np.random.default_rng(4).standard_normal(50)
        a = random_sparsify(v, 0.3, rng_seed=11)
        b = random_sparsify(v, 0.3, rng_seed=11)
        assert np.array_equal(a.indices, b.indices)

    def test_uniform_index_frequency(self):
        """Each index retained with frequency K +/- 0.02 over many draws."""
        d, draws = 100, 10000
        v = np.ones(d)
        counts = np.zeros(d)
        for s in range(draws):
            u = random_sparsify(v, 0.2, rng_seed=s)
            assert len(u) == 20
            counts[u.indices] += 1
        freq = counts / draws
        assert np.all(np.abs(freq - 0.2) < 0.02)

    def test_values_match_positions(self):
        v = np.arange(10.0)
        u = random_sparsify(v, 0.4, rng_seed=2)
        assert np.array_equal(u.values, v[u.indices])


class TestDensifyAndContainer:
    def test_empty_update(self):
        assert np.array_equal(densify(SparseUpdate(4, [], [])), np.zeros(4))

    def test_single_entry(self):
        assert np.array_equal(densify(SparseUpdate(3, [1], [2.5])),
                              np.array([0.0, 2.5, 0.0]))

    def test_nonzeros_only_at_retained(self):
        v = np.array([3.0, -1.0, 0.5, 2.0])
        u = top_k_sparsify(v, 0.5)
        dense = densify(u)
        mask = np.zeros(4, dtype=bool)
        mask[u.indices] = True
        assert np.all(dense[~mask] == 0.0)
        assert np.array_equal(dense[mask], v[mask])

    def test_container_validation(self):
        with pytest.raises(ValueError):
            SparseUpdate(4, [0, 4], [1.0, 2.0])  # index >= dim
        with pytest.raises(ValueError):
            SparseUpdate(4, [2, 1], [1.0, 2.0])  # not increasing
        with pytest.raises(ValueError):
            SparseUpdate(4, [1, 1], [1.0, 2.0])  # duplicate
        with pytest.raises(ValueError):
            SparseUpdate(4, [1], [1.0, 2.0])  # length mismatch


class TestPolicyDispatch:
    def test_policy_validation(self):
        with pytest.raises(ValueError):
            SparsityPolicy("top_k")  # missing rate
        with pytest.raises(ValueError):
            SparsityPolicy("top_k", rate=1.5)
        with pytest.raises(ValueError):
            SparsityPolicy("threshold")  # missing tau
        with pytest.raises(ValueError):
            SparsityPolicy("threshold", tau=-1.0)
        with pytest.raises(ValueError):
            SparsityPolicy("banana")

    def test_dispatch_matches_direct_calls(self):
        v = np.random.default_rng(8).standard_normal(20)
        assert sparsify(v, SparsityPolicy("top_k", rate=0.25)) == top_k_sparsify(v, 0.25)
        assert sparsify(v, SparsityPolicy("threshold", tau=0.5)) == \
            threshold_sparsify(v, 0.5)
        assert sparsify(v, SparsityPolicy("random", rate=0.25), rng_seed=9) == \
            random_sparsify(v, 0.25, rng_seed=9)
        dense = sparsify(v, SparsityPolicy("dense"))
        assert np.array_equal(densify(dense), v)

    def test_random_requires_seed(self):
        with pytest.raises(ValueError):
            sparsify(np.ones(3), SparsityPolicy("random", rate=0.5))
