import math

import numpy as np
import pytest

from simplexsmooth.bandwidth import (
    BandwidthSearch,
    _mean_weighted_sq_error,
    _minimize_score,
    b_opt_global,
    b_opt_local,
    h_term,
    hessian_fd,
    loocv_score,
    loocv_select,
    lscv_score,
    lscv_select,
    mise_asymptotic,
    plug_in_global_bandwidth,
)
from simplexsmooth.estimators import Dataset, predict_grid
from simplexsmooth.kernels import sample_uniform_simplex
from simplexsmooth.targets import get_target


def _affine_data(rng, n=20, d=2):
    X = sample_uniform_simplex(d, rng, size=n)
    return Dataset(X, 1.0 + X @ np.arange(1.0, d + 1.0))


class TestScoreAccumulator:
    def test_oracle_predictions_score_zero(self, rng):
        truth = rng.normal(size=50)
        assert _mean_weighted_sq_error(truth, truth, 2.0) == 0.0

    def test_residual_doubling_quadruples(self, rng):
        truth = rng.normal(size=50)
        est = truth + rng.normal(size=50)
        s1 = _mean_weighted_sq_error(est, truth, 2.0)
        s2 = _mean_weighted_sq_error(truth + 2.0 * (est - truth), truth, 2.0)
        assert s2 == pytest.approx(4.0 * s1, rel=1e-12)


class TestLscvScore:
    def test_affine_data_scores_zero(self, rng):
        data = _affine_data(rng)
        target = lambda pts: 1.0 + pts @ np.array([1.0, 2.0])
        U = sample_uniform_simplex(2, rng, size=200)
        assert lscv_score("ll", data, 0.3, target, U) <= 1e-16

    def test_matches_hand_accumulation(self, rng):
        X = sample_uniform_simplex(2, rng, size=12)
        data = Dataset(X, rng.normal(size=12))
        target = get_target(3)
        U = sample_uniform_simplex(2, rng, size=5)
        est = predict_grid(data, 0.2, U, "nw")
        hand = float(np.mean((est - target.value(U)) ** 2) / 2.0)
        assert lscv_score("nw", data, 0.2, target.value, U) == pytest.approx(hand, rel=1e-15)

    def test_empty_eval_points_rejected(self, rng):
        data = _affine_data(rng)
        with pytest.raises(ValueError):
            lscv_score("ll", data, 0.1, lambda p: p[:, 0], np.empty((0, 2)))


class TestMinimizer:
    def test_convex_curve_recovers_minimiser(self):
        search = BandwidthSearch(b_min=1e-3, b_max=2.0, refine_tolerance=1e-4)
        res = _minimize_score(lambda b: (b - 0.3) ** 2 + 1.0, search)
        assert abs(res.b_hat - 0.3) / 0.3 <= 3e-4
        assert not res.boundary_hit
        assert res.score == min(s for _, s in res.score_curve)

    def test_monotone_decreasing_hits_upper_edge(self):
        res = _minimize_score(lambda b: 1.0 / b, BandwidthSearch())
        assert res.b_hat == 2.0 and res.boundary_hit

    def test_monotone_increasing_hits_lower_edge(self):
        res = _minimize_score(lambda b: b, BandwidthSearch())
        assert res.b_hat == 1e-3 and res.boundary_hit

    def test_curve_is_sorted_by_bandwidth(self):
        res = _minimize_score(lambda b: (math.log(b) + 1.0) ** 2, BandwidthSearch())
        bs = [b for b, _ in res.score_curve]
        assert bs == sorted(bs)

    def test_search_validation(self):
        with pytest.raises(ValueError):
            BandwidthSearch(b_min=0.5, b_max=0.1)
        with pytest.raises(ValueError):
            BandwidthSearch(coarse_grid_size=4)


class TestLscvSelect:
    def test_deterministic_given_sample(self, rng):
        target = get_target(5)
        X = sample_uniform_simplex(2, rng, size=25)
        data = Dataset(X, target.value(X) + 0.02 * rng.normal(size=25))
        U = sample_uniform_simplex(2, rng, size=300)
        r1 = lscv_select("ll", data, target.value, eval_points=U)
        r2 = lscv_select("ll", data, target.value, eval_points=U)
        assert r1.b_hat == r2.b_hat and r1.score == r2.score
        assert r1.score_curve == r2.score_curve

    def test_deterministic_given_seed(self, rng):
        target = get_target(2)
        X = sample_uniform_simplex(2, rng, size=25)
        data = Dataset(X, target.value(X) + 0.02 * rng.normal(size=25))
        r1 = lscv_select("nw", data, target.value, rng=np.random.default_rng(5))
        r2 = lscv_select("nw", data, target.value, rng=np.random.default_rng(5))
        assert r1.b_hat == r2.b_hat and r1.score == r2.score

    def test_needs_sample_or_rng(self, rng):
        data = _affine_data(rng)
        with pytest.raises(ValueError, match="rng"):
            lscv_select("ll", data, lambda p: p[:, 0])


class TestLoocv:
    def test_two_point_hand_computation(self):
        # each held-out fit sees one point, so it predicts that point's y
        data = Dataset(np.array([0.2, 0.8]), np.array([0.0, 1.0]))
        for b in (0.05, 0.5):
            for method in ("ll", "nw"):
                assert loocv_score(data, b, method) == pytest.approx(1.0, rel=1e-12)

    def test_pure_duplicates_score_zero(self):
        X = np.tile([0.3, 0.4], (6, 1))
        data = Dataset(X, np.full(6, 2.5))
        assert loocv_score(data, 0.4, "ll") == pytest.approx(0.0, abs=1e-24)

    def test_permutation_invariance(self, rng):
        X = sample_uniform_simplex(2, rng, size=15)
        y = rng.normal(size=15)
        data = Dataset(X, y)
        perm = rng.permutation(15)
        shuffled = Dataset(X[perm], y[perm])
        assert loocv_score(data, 0.2) == pytest.approx(loocv_score(shuffled, 0.2), rel=1e-12)

    def test_needs_two_points(self):
        data = Dataset(np.array([[0.3, 0.3]]), np.array([1.0]))
        with pytest.raises(ValueError, match="n >= 2"):
            loocv_score(data, 0.1)

    def test_window_excluding_minimiser_flags_boundary(self, rng):
        target = get_target(5)
        X = sample_uniform_simplex(2, rng, size=30)
        data = Dataset(X, target.value(X) + 0.05 * rng.normal(size=30))
        full = loocv_select(data, search=BandwidthSearch(b_min=1e-3, b_max=2.0))
        assert not full.boundary_hit  # sanity: interior optimum exists
        shifted = loocv_select(data, search=BandwidthSearch(b_min=min(2.0 * full.b_hat, 1.0), b_max=2.0))
        assert shifted.boundary_hit and shifted.b_hat == shifted.score_curve[0][0]

    def test_select_determinism(self, rng):
        data = _affine_data(rng, n=12)
        r1 = loocv_select(data, search=BandwidthSearch(coarse_grid_size=8))
        r2 = loocv_select(data, search=BandwidthSearch(coarse_grid_size=8))
        assert r1.b_hat == r2.b_hat and r1.score_curve == r2.score_curve


class TestBiasCoefficient:
    def test_affine_target_gives_zero(self):
        h0 = lambda s: np.zeros((2, 2))
        for J, lam in (((), None), ((0,), None), ((0, 1), [1.0, 2.0])):
            assert h_term(h0, [0.3, 0.3], J=J, lam=lam) == 0.0

    def test_product_target_interior(self, rng):
        # target s1*s2 has unit cross partials and zero diagonal, so the
        # interior coefficient is -s1*s2
        target = get_target(1)
        for _ in range(5):
            s = 0.1 + 0.3 * rng.random(2)
            assert h_term(target.hessian, s) == pytest.approx(-s[0] * s[1], rel=1e-12)

    def test_full_subset_identity_hessian(self):
        val = h_term(lambda s: np.eye(2), [0.05, 0.05], J=(0, 1), lam=[1.0, 1.0])
        assert val == pytest.approx(3.0, rel=1e-14)

    def test_full_subset_requires_lam(self):
        with pytest.raises(ValueError, match="lam"):
            h_term(lambda s: np.eye(2), [0.05, 0.05], J=(0, 1))

    def test_asymmetric_hessian_is_symmetrised(self):
        H = np.array([[0.0, 2.0], [0.0, 0.0]])
        s = [0.3, 0.2]
        # symmetrised cross partial is 1, matching target 1's Hessian
        assert h_term(H, s) == pytest.approx(-s[0] * s[1], rel=1e-12)


class TestOptimalBandwidths:
    def test_local_interior_rate(self):
        kw = dict(J=(), lam=None, sigma2=0.5, f=2.0, h=0.7)
        d = 2
        b1 = b_opt_local([0.3, 0.3], n=100, **kw)
        b2 = b_opt_local([0.3, 0.3], n=200, **kw)
        assert b1 / b2 == pytest.approx(2.0 ** (2.0 / (d + 4)), rel=1e-12)

    def test_local_noise_scaling(self):
        base = dict(J=(), lam=None, f=2.0, h=0.7, n=500)
        b1 = b_opt_local([0.3, 0.3], sigma2=1.0, **base)
        b2 = b_opt_local([0.3, 0.3], sigma2=2.0, **base)
        assert b2 / b1 == pytest.approx(2.0 ** (2.0 / 6.0), rel=1e-12)

    def test_local_univariate_rate(self):
        kw = dict(J=(), lam=None, sigma2=1.0, f=1.0, h=1.0)
        b1 = b_opt_local([0.5], n=100, **kw)
        b2 = b_opt_local([0.5], n=3200, **kw)
        assert b1 / b2 == pytest.approx(32.0 ** (2.0 / 5.0), rel=1e-12)

    def test_local_zero_bias_rejected(self):
        with pytest.raises(ValueError, match="bias"):
            b_opt_local([0.3, 0.3], J=(), lam=None, sigma2=1.0, f=1.0, h=0.0, n=100)

    def test_global_fixture(self):
        # n = 1024, d = 2, unit integrals: (1/2048)^(1/3)
        assert b_opt_global(1024, 1.0, 1.0, 2) == pytest.approx((1.0 / 2048.0) ** (1.0 / 3.0), rel=1e-12)

    def test_global_scale_invariance(self):
        b1 = b_opt_global(500, 0.7, 0.2, 2)
        b2 = b_opt_global(500, 7.0, 2.0, 2)
        assert b1 == pytest.approx(b2, rel=1e-12)

    def test_global_d2_exponent(self):
        b1 = b_opt_global(100, 1.0, 1.0, 2)
        b2 = b_opt_global(800, 1.0, 1.0, 2)
        assert b1 / b2 == pytest.approx(2.0, rel=1e-12)

    def test_global_nonpositive_integrals(self):
        with pytest.raises(ValueError):
            b_opt_global(100, 1.0, 0.0, 2)
        with pytest.raises(ValueError):
            b_opt_global(100, -1.0, 1.0, 2)


class TestMiseExpansion:
    def test_grid_minimiser_matches_formula(self, rng):
        for _ in range(3):
            n = int(rng.integers(50, 5000))
            V = float(rng.uniform(0.1, 5.0))
            B = float(rng.uniform(0.1, 5.0))
            d = int(rng.integers(1, 4))
            b_star = b_opt_global(n, V, B, d)
            grid = b_star * np.exp(np.linspace(-0.7, 0.7, 4001))
            vals = [mise_asymptotic(b, n, V, B, d) for b in grid]
            assert grid[int(np.argmin(vals))] == pytest.approx(b_star, rel=1e-3)

    def test_variance_bias_ratio_at_optimum(self):
        n, V, B, d = 700, 1.3, 0.4, 2
        b = b_opt_global(n, V, B, d)
        variance = V / (n * b ** (d / 2.0))
        bias = b * b * B
        assert variance / bias == pytest.approx(4.0 / d, rel=1e-10)

    def test_doubling_n_halves_variance_term_only(self):
        n, V, B, d = 100, 1.0, 0.7, 2
        b = 0.2
        bias = b * b * B
        v1 = mise_asymptotic(b, n, V, B, d) - bias
        v2 = mise_asymptotic(b, 2 * n, V, B, d) - bias
        assert v2 == pytest.approx(v1 / 2.0, rel=1e-12)

    def test_value_at_optimum_matches_direct_display(self):
        # direct evaluation of the minimised expansion:
        # n^(-4/(d+4)) (1 + d/4) (d/4)^(-d/(d+4)) V^(4/(d+4)) B^(d/(d+4))
        for n, V, B, d in ((250, 0.9, 0.3, 1), (1000, 2.0, 1.1, 2), (5000, 0.4, 0.6, 3)):
            b = b_opt_global(n, V, B, d)
            direct = (
                n ** (-4.0 / (d + 4))
                * (1.0 + d / 4.0)
                * (d / 4.0) ** (-d / (d + 4.0))
                * V ** (4.0 / (d + 4))
                * B ** (d / (d + 4.0))
            )
            assert mise_asymptotic(b, n, V, B, d) == pytest.approx(direct, rel=1e-12)


class TestHessianFd:
    def test_quadratic_is_exact(self):
        H = np.array([[4.0, 0.7], [0.7, -2.2]])
        g = np.array([0.2, -1.0])

        def m(s):
            return 1.3 + g @ s + 0.5 * s @ H @ s

        out = hessian_fd(m, [0.3, 0.3])
        np.testing.assert_allclose(out, H, atol=1e-6)

    def test_trig_target_diagonal(self):
        target = get_target(3)
        out = hessian_fd(lambda s: float(target.value(s)), [0.3, 0.3])
        np.testing.assert_allclose(out, np.diag([-np.sin(0.3), -np.cos(0.3)]), atol=1e-5)

    def test_output_exactly_symmetric(self):
        target = get_target(6)
        out = hessian_fd(lambda s: float(target.value(s)), [0.25, 0.4])
        np.testing.assert_array_equal(out, out.T)

    def test_boundary_clearance_enforced(self):
        with pytest.raises(ValueError, match="clearance"):
            hessian_fd(lambda s: s[0] ** 2, [1e-9, 0.3])
        with pytest.raises(ValueError, match="clearance"):
            hessian_fd(lambda s: s[0] ** 2, [0.5, 0.5 - 1e-9])


class TestPlugIn:
    def test_positive_and_n_scaling(self):
        target = get_target(5)
        m = lambda s: float(target.value(s))
        dens = lambda pts: np.full(len(pts), 2.0)
        b1 = plug_in_global_bandwidth(m, 2, 100, 0.01, dens, np.random.default_rng(3), mc_size=512)
        b2 = plug_in_global_bandwidth(m, 2, 1600, 0.01, dens, np.random.default_rng(3), mc_size=512)
        assert b1 > 0
        assert b1 / b2 == pytest.approx(16.0 ** (2.0 / 6.0), rel=1e-10)
