"""Group statistics: MWU, permutation tests, FDR, correlations, screening."""

from itertools import combinations
from math import comb

import numpy as np
import pytest

from sleepq.errors import DomainError
from sleepq.stats import (
    StatResult,
    chi_square_independence,
    fdr_bh,
    format_z_p,
    groupwise_feature_screen,
    mann_whitney_u,
    partial_correlation,
    pearson_correlation,
    permutation_test,
    sobel_test,
)
from sleepq.synth import gen_cohort


def _exhaustive_mwu_p(a, b):
    """Brute-force two-sided exact p over all group assignments."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pooled = np.concatenate([a, b])
    n, n_a = len(pooled), len(a)

    def u_of(x, y):
        diff = x[:, None] - y[None, :]
        return float(((diff > 0) + 0.5 * (diff == 0)).sum())

    u_obs = u_of(a, b)
    le = ge = 0
    for subset in combinations(range(n), n_a):
        rest = [i for i in range(n) if i not in set(subset)]
        u = u_of(pooled[list(subset)], pooled[rest])
        if u <= u_obs + 1e-9:
            le += 1
        if u >= u_obs - 1e-9:
            ge += 1
    return min(1.0, 2.0 * min(le, ge) / comb(n, n_a))


class TestMannWhitney:
    def test_separated_pairs(self):
        res = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
        assert res.method == "mwu-exact"
        assert res.statistic == 0.0
        np.testing.assert_allclose(res.p_value, 1.0 / 3.0, rtol=1e-15)

    def test_fully_separated_fives(self):
        res = mann_whitney_u([1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
        assert res.method == "mwu-exact"
        np.testing.assert_allclose(res.p_value, 2.0 / 252.0, rtol=1e-15)

    def test_identical_samples_give_p_one(self):
        res = mann_whitney_u([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.p_value == 1.0

    def test_exact_agrees_with_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(12):
            n_a = int(rng.integers(2, 5))
            n_b = int(rng.integers(2, 5))
            a = np.round(rng.normal(size=n_a), 1)
            b = np.round(rng.normal(0.5, size=n_b), 1)
            res = mann_whitney_u(a, b)
            assert res.method == "mwu-exact"
            np.testing.assert_allclose(res.p_value, _exhaustive_mwu_p(a, b),
                                       rtol=1e-12)

    def test_exact_with_ties_agrees_with_brute_force(self):
        a = [1.0, 2.0, 2.0, 3.0]
        b = [2.0, 3.0, 3.0, 4.0]
        res = mann_whitney_u(a, b)
        np.testing.assert_allclose(res.p_value, _exhaustive_mwu_p(a, b),
                                   rtol=1e-12)

    def test_large_samples_use_normal_approximation(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=10)
        b = rng.normal(size=10)
        res = mann_whitney_u(a, b)
        assert res.method == "mwu-normal"
        assert 0.0 < res.p_value <= 1.0

    def test_normal_approximation_close_to_exact_at_boundary(self):
        # n_a + n_b = 12 runs exact; compare against the approximation
        # computed on a near-identical configuration
        rng = np.random.default_rng(2)
        a = rng.normal(size=6)
        b = rng.normal(1.0, size=6)
        exact = mann_whitney_u(a, b)
        assert exact.method == "mwu-exact"
        bigger = mann_whitney_u(np.concatenate([a, a]), np.concatenate([b, b]))
        assert bigger.method == "mwu-normal"
        assert bigger.p_value < exact.p_value + 0.25

    def test_empty_sample_rejected(self):
        with pytest.raises(DomainError):
            mann_whitney_u([], [1.0])


class TestChiSquare:
    def test_balanced_association(self):
        res = chi_square_independence([[30, 10], [10, 30]])
        np.testing.assert_allclose(res.statistic, 20.0, rtol=1e-12)
        np.testing.assert_allclose(res.p_value, 7.744216431044088e-06, rtol=1e-9)

    def test_independent_table(self):
        res = chi_square_independence([[10, 10], [10, 10]])
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_yates_correction_shrinks_statistic(self):
        res = chi_square_independence([[30, 10], [10, 30]], yates=True)
        np.testing.assert_allclose(res.statistic, 18.05, rtol=1e-12)
        np.testing.assert_allclose(res.p_value, 2.1517864378120177e-05, rtol=1e-9)

    def test_empty_margin_rejected(self):
        with pytest.raises(DomainError):
            chi_square_independence([[0, 0], [5, 5]])


class TestPermutation:
    def test_label_swap_gives_identical_p(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=8)
        b = rng.normal(1.0, size=10)
        p_ab = permutation_test(a, b, r=500, seed=9).p_value
        p_ba = permutation_test(b, a, r=500, seed=9).p_value
        assert p_ab == p_ba

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=6)
        b = rng.normal(size=6)
        assert (
            permutation_test(a, b, r=300, seed=5).p_value
            == permutation_test(a, b, r=300, seed=5).p_value
        )

    def test_planted_shift_detected(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=12)
        b = rng.normal(3.0, size=12)
        res = permutation_test(a, b, r=999, seed=1)
        assert res.p_value == 1.0 / 1000.0

    def test_identical_groups_not_rejected(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=12)
        b = rng.normal(size=12)
        assert permutation_test(a, b, r=999, seed=2).p_value > 0.05

    def test_callable_statistic(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=8)
        b = rng.normal(2.0, size=8)
        res = permutation_test(
            a, b, r=200, seed=3,
            statistic=lambda x, y: float(np.median(x) - np.median(y)),
        )
        assert res.p_value < 0.05

    def test_minimum_p_is_one_over_r_plus_one(self):
        a = [0.0, 0.0, 0.0, 0.0]
        b = [10.0, 10.0, 10.0, 10.0]
        res = permutation_test(a, b, r=99, seed=0)
        assert res.p_value >= 1.0 / 100.0

    def test_group_size_floor(self):
        with pytest.raises(DomainError):
            permutation_test([1.0], [2.0, 3.0], r=10)

    def test_unknown_statistic_name(self):
        with pytest.raises(DomainError):
            permutation_test([1.0, 2.0], [3.0, 4.0], statistic="median-diff")


def _fdr_by_hand(p, alpha):
    """Step-up rule applied literally: find the largest k with
    p_(k) <= k*alpha/m, reject the k smallest."""
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    k_max = 0
    for rank, i in enumerate(order, start=1):
        if p[i] <= rank * alpha / m:
            k_max = rank
    reject = [False] * m
    for rank, i in enumerate(order, start=1):
        if rank <= k_max:
            reject[i] = True
    return reject


class TestFdr:
    def test_three_value_example(self):
        out = fdr_bh([0.01, 0.02, 0.04], alpha=0.05)
        assert out == [(True, 0.03), (True, 0.03), (True, 0.04)]

    def test_matches_hand_rule_on_random_vectors(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            m = int(rng.integers(1, 21))
            p = rng.random(m).tolist()
            alpha = float(rng.uniform(0.01, 0.2))
            got = [rj for rj, _ in fdr_bh(p, alpha=alpha)]
            assert got == _fdr_by_hand(p, alpha)

    def test_adjusted_p_thresholding_is_equivalent(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            m = int(rng.integers(1, 21))
            p = rng.random(m).tolist()
            out = fdr_bh(p, alpha=0.05)
            for rj, ap in out:
                assert rj == (ap <= 0.05)

    def test_rejections_superset_of_bonferroni(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            m = int(rng.integers(1, 21))
            p = rng.random(m)
            out = fdr_bh(p.tolist(), alpha=0.05)
            for (rj, _), raw in zip(out, p):
                if raw <= 0.05 / m:
                    assert rj

    def test_order_independence(self):
        p = [0.8, 0.01, 0.2, 0.03, 0.5]
        out = fdr_bh(p, alpha=0.05)
        rev = fdr_bh(p[::-1], alpha=0.05)
        assert out == rev[::-1]

    def test_invalid_p_rejected(self):
        with pytest.raises(DomainError):
            fdr_bh([0.0, 0.5])
        with pytest.raises(DomainError):
            fdr_bh([1.5])
        with pytest.raises(DomainError):
            fdr_bh([])


class TestCorrelations:
    def test_pearson_known_value(self):
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        y = [2.0, 1.0, 4.0, 3.0, 5.0]
        res = pearson_correlation(x, y)
        np.testing.assert_allclose(res.statistic, 0.8, rtol=1e-12)
        assert 0.0 < res.p_value < 0.2

    def test_perfect_correlation(self):
        x = np.arange(10.0)
        res = pearson_correlation(x, 2 * x + 1)
        np.testing.assert_allclose(res.statistic, 1.0, rtol=1e-12)

    def test_partial_removes_shared_covariate(self):
        rng = np.random.default_rng(11)
        z = rng.normal(size=200)
        x = z + 0.1 * rng.normal(size=200)
        y = z + 0.1 * rng.normal(size=200)
        raw = pearson_correlation(x, y)
        part = partial_correlation(x, y, z[:, None])
        assert raw.statistic > 0.9
        assert abs(part.statistic) < 0.2

    def test_partial_needs_enough_samples(self):
        with pytest.raises(DomainError):
            partial_correlation([1.0, 2.0, 3.0], [1.0, 2.0, 3.0],
                                np.ones((3, 1)))

    def test_sobel_known_value(self):
        # z = a*b / sqrt(b^2 se_a^2 + a^2 se_b^2) = 4 / sqrt(2)
        res = sobel_test(2.0, 0.5, 2.0, 0.5)
        np.testing.assert_allclose(res.statistic, 2.8284271247461903, rtol=1e-12)
        np.testing.assert_allclose(res.p_value, 0.004677734981047266, rtol=1e-9)

    def test_sobel_zero_effect(self):
        res = sobel_test(0.0, 0.5, 0.0, 0.6)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_sobel_rejects_bad_se(self):
        with pytest.raises(DomainError):
            sobel_test(1.0, 0.0, 1.0, 0.5)

    def test_format_z_p(self):
        res = StatResult(statistic=0.9452, p_value=0.3447, method="sobel")
        assert format_z_p(res) == "z = 0.945, p = 0.345"


class TestStatResult:
    def test_p_value_bounds(self):
        with pytest.raises(DomainError):
            StatResult(statistic=0.0, p_value=0.0, method="x")
        with pytest.raises(DomainError):
            StatResult(statistic=0.0, p_value=1.5, method="x")

    def test_corrected_p_cannot_undershoot(self):
        with pytest.raises(DomainError):
            StatResult(statistic=0.0, p_value=0.5, method="x", corrected_p=0.4)


def _cohort_matrix(subjects):
    X = np.vstack([s.features for s in subjects])
    y = [s.label for s in subjects]
    return X, y


class TestFeatureScreen:
    def test_recovers_planted_features(self):
        X, y = _cohort_matrix(
            gen_cohort(11, 13, n_features=20, effect={2: 3.0, 7: 3.0}, seed=21)
        )
        mask, p, adj = groupwise_feature_screen(X, y, r=1000, alpha=0.05, seed=4)
        assert mask.shape == (20,)
        assert set(np.flatnonzero(mask)) == {2, 7}
        assert np.all(adj >= p - 1e-12)

    def test_per_column_streams_are_stable(self):
        # each column owns a (seed, column) RNG stream, so the screen is
        # reproducible and each column matches its standalone test
        X, y = _cohort_matrix(
            gen_cohort(8, 8, n_features=6, effect={1: 2.5}, seed=13)
        )
        mask, p, adj = groupwise_feature_screen(X, y, r=300, alpha=0.05, seed=2)
        mask2, p2, adj2 = groupwise_feature_screen(X, y, r=300, alpha=0.05,
                                                   seed=2)
        np.testing.assert_array_equal(mask, mask2)
        np.testing.assert_array_equal(p, p2)
        np.testing.assert_array_equal(adj, adj2)
        in_a = np.array([label == "GS" for label in y])
        for f in range(X.shape[1]):
            res = permutation_test(X[in_a, f], X[~in_a, f], r=300,
                                   seed=np.random.SeedSequence([2, f]))
            assert res.p_value == p[f]

    def test_needs_two_groups(self):
        X = np.zeros((6, 3))
        with pytest.raises(DomainError):
            groupwise_feature_screen(X, ["a"] * 6, r=10)

    def test_needs_two_per_group(self):
        X = np.zeros((4, 3))
        with pytest.raises(DomainError):
            groupwise_feature_screen(X, ["a", "b", "b", "b"], r=10)
