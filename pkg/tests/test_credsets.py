import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rbvm.credsets import (CredibleEllipsoid, chi2_cdf, chi2_quantile, contains, diameter,
                           ellipsoid_case1, ellipsoid_case2, interval_case2, regularized_gamma)
from rbvm.posterior import FunctionalPosterior, moments_from_values

Q95_1 = 3.841458820694124


def fixed(center, sigma, values=None):
    center = np.atleast_1d(np.asarray(center, float))
    sigma = np.atleast_2d(np.asarray(sigma, float))
    if values is None:
        values = np.tile(center, (2, 1))
    return FunctionalPosterior(center, sigma, values)


class TestChi2:
    def test_closed_form_k2(self):
        assert abs(chi2_quantile(2, 0.95) + 2 * math.log(0.05)) <= 1e-8

    def test_k1_is_squared_normal_quantile(self):
        assert chi2_quantile(1, 0.95) == pytest.approx(stats.norm.ppf(0.975) ** 2, abs=1e-8)
        assert chi2_quantile(1, 0.95) == pytest.approx(3.84146, abs=1e-5)

    @pytest.mark.parametrize("k", range(1, 8))
    @pytest.mark.parametrize("p", [0.01, 0.5, 0.9, 0.95, 0.99, 0.999])
    def test_against_scipy(self, k, p):
        assert chi2_quantile(k, p) == pytest.approx(stats.chi2.ppf(p, k), abs=1e-8)

    @given(st.floats(0.01, 50), st.floats(0.0, 200))
    @settings(max_examples=200, deadline=None)
    def test_incomplete_gamma_against_scipy(self, a, x):
        from scipy.special import gammainc
        assert regularized_gamma(a, x) == pytest.approx(gammainc(a, x), abs=1e-12)

    @pytest.mark.parametrize("k", range(1, 6))
    def test_round_trip(self, k):
        for p in (0.5, 0.9, 0.95, 0.99):
            assert abs(chi2_cdf(chi2_quantile(k, p), k) - p) <= 1e-8

    def test_small_p(self):
        assert chi2_quantile(3, 1e-12) < 1e-6

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            chi2_quantile(2, p)

    def test_bad_dof(self):
        with pytest.raises(ValueError):
            chi2_quantile(0, 0.5)


class TestCase1:
    def test_k1_example(self):
        ell = ellipsoid_case1(fixed(0.0, 4.0), 0.95)
        assert ell.radius == pytest.approx(Q95_1, abs=1e-8)
        assert diameter(ell) == pytest.approx(2 * math.sqrt(Q95_1 * 4), rel=1e-12)
        assert diameter(ell) == pytest.approx(7.8400, abs=2e-4)  # 7.83986 rounded

    def test_zero_covariance_is_degenerate(self):
        ell = ellipsoid_case1(fixed([1.0, 2.0], np.zeros((2, 2))), 0.9)
        assert ell.degenerate
        np.testing.assert_array_equal(ell.shape_inv, np.eye(2))

    def test_shape_inverse(self):
        S = np.array([[2.0, 0.3], [0.3, 0.5]])
        ell = ellipsoid_case1(fixed([0, 0], S), 0.9)
        assert not ell.degenerate
        np.testing.assert_allclose(S @ ell.shape_inv, np.eye(2), atol=1e-8)

    @given(st.floats(0, 2 * np.pi), st.integers(0, 2 ** 31))
    @settings(max_examples=40, deadline=None)
    def test_rotation_equivariance(self, angle, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((2, 2))
        S = A @ A.T + 0.1 * np.eye(2)
        c = rng.standard_normal(2)
        Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        before = ellipsoid_case1(fixed(c, S), 0.9)
        after = ellipsoid_case1(fixed(Q @ c, Q @ S @ Q.T), 0.9)
        for x in rng.normal(c, 2.0, size=(20, 2)):
            qb = before.quadratic_form(x)[0]
            if abs(qb - before.radius) > 1e-9:
                assert contains(before, x) == contains(after, Q @ x)
            assert after.quadratic_form(Q @ x)[0] == pytest.approx(qb, rel=1e-9, abs=1e-12)


class TestCase2:
    @pytest.mark.parametrize("k", [1, 2])
    def test_gaussian_calibration(self, k):
        draws = np.random.default_rng(k).standard_normal((100_000, k))
        ell = ellipsoid_case2(moments_from_values(draws), 0.95)
        assert abs(ell.radius - stats.chi2.ppf(0.95, k)) <= 0.15

    def test_repeated_draw(self):
        ell = ellipsoid_case2(moments_from_values(np.ones((5, 1))), 0.9)
        assert ell.radius == 0.0 and ell.degenerate

    @given(st.integers(10, 500), st.floats(0.05, 0.99), st.integers(0, 2 ** 31))
    @settings(max_examples=60, deadline=None)
    def test_mass_convention(self, S, level, seed):
        draws = np.random.default_rng(seed).standard_normal((S, 2))
        fp = moments_from_values(draws)
        ell = ellipsoid_case2(fp, level)
        inside = np.mean(ell.quadratic_form(draws) <= ell.radius)
        assert inside >= level - 1e-12
        # S > k + 1 so the quadratic forms are almost surely distinct
        assert inside <= level + 1.0 / S + 1e-12

    @given(st.integers(0, 2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_affine_invariance(self, seed):
        rng = np.random.default_rng(seed)
        draws = rng.standard_normal((400, 3))
        A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        b = rng.standard_normal(3)
        r1 = ellipsoid_case2(moments_from_values(draws), 0.9).radius
        r2 = ellipsoid_case2(moments_from_values(draws @ A.T + b), 0.9).radius
        assert r2 == pytest.approx(r1, rel=1e-7)


class TestInterval:
    def test_normal_quantile(self):
        draws = np.random.default_rng(0).standard_normal((100_000, 1))
        iv = interval_case2(moments_from_values(draws), 0.95)
        assert iv.half_width == pytest.approx(1.96, abs=0.03)

    def test_constant_draws(self):
        iv = interval_case2(moments_from_values(np.full((10, 1), 2.5)), 0.9)
        assert iv.half_width == 0 and iv.endpoints == (2.5, 2.5)

    def test_requires_k1(self):
        with pytest.raises(ValueError):
            interval_case2(moments_from_values(np.zeros((4, 2)) + np.arange(4)[:, None]), 0.9)

    def test_matches_ellipsoid(self):
        draws = np.random.default_rng(3).normal(1.0, 0.7, size=(5000, 1))
        fp = moments_from_values(draws)
        iv = interval_case2(fp, 0.9)
        ell = ellipsoid_case2(fp, 0.9)
        half = math.sqrt(ell.radius * fp.sigma_hat[0, 0])
        lo, hi = iv.endpoints
        assert lo == pytest.approx(fp.psi_hat[0] - half, abs=1e-10)
        assert hi == pytest.approx(fp.psi_hat[0] + half, abs=1e-10)


class TestMembershipDiameter:
    def test_boundary(self):
        ell = CredibleEllipsoid(np.zeros(1), np.eye(1), np.eye(1), 4.0, "case1", False)
        assert contains(ell, [0.0])
        assert contains(ell, [2.0])
        assert not contains(ell, [2.0001])

    def test_degenerate_is_ball(self):
        ell = ellipsoid_case1(fixed([0, 0], np.zeros((2, 2))), 0.9)
        r = math.sqrt(ell.radius)
        assert contains(ell, [r * 0.6, r * 0.8 - 1e-9])
        assert not contains(ell, [r * 0.6, r * 0.8 + 1e-6])

    def test_k1_formula(self):
        ell = CredibleEllipsoid(np.zeros(1), np.eye(1), np.eye(1), Q95_1, "case1", False)
        assert diameter(ell) == pytest.approx(3.9200, abs=1e-4)

    def test_diag(self):
        S = np.diag([1.0, 4.0])
        ell = CredibleEllipsoid(np.zeros(2), S, np.linalg.inv(S), 1.0, "case1", False)
        assert diameter(ell) == pytest.approx(4.0)

    @given(st.floats(0.1, 10))
    @settings(max_examples=20, deadline=None)
    def test_homogeneity(self, c):
        S = np.array([[1.0, 0.2], [0.2, 0.3]])
        a = ellipsoid_case1(fixed([0, 0], S), 0.9)
        b = ellipsoid_case1(fixed([0, 0], c ** 2 * S), 0.9)
        assert diameter(b) == pytest.approx(c * diameter(a), rel=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_brute_force(self, k):
        rng = np.random.default_rng(k)
        A = rng.standard_normal((k, k))
        S = A @ A.T + 0.05 * np.eye(k)
        ell = ellipsoid_case1(fixed(np.zeros(k), S), 0.9)
        # boundary points along random directions; the widest chord passes through the centre
        u = rng.standard_normal((10_000, k))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        qf = np.einsum("ni,ij,nj->n", u, ell.shape_inv, u)
        radii = np.sqrt(ell.radius / qf)
        assert 2 * radii.max() == pytest.approx(diameter(ell), rel=1e-3)
        assert 2 * radii.max() <= diameter(ell) * (1 + 1e-12)
