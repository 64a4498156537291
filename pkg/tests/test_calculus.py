"""Legendre gradients, B.H. density, distortion, S-curvature, divergence and Laplacians."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tests import oracles
from zermelo import vectorfields as vf
from zermelo import zoo
from zermelo.calculus import (
    ScalarField,
    bh_density,
    bh_measure,
    constant_measure,
    distortion,
    divergence,
    indicatrix_volume,
    laplacian_dmu,
    laplacian_osculating,
    legendre_gradient,
    legendre_residual,
    s_curvature,
    s_curvature_probe,
)
from zermelo.diffengine import DEFAULT_CONFIG, NumericsConfig, dot, log, sqrt
from zermelo.errors import KindViolation, LegendreOutOfRange
from zermelo.finsler import legendre_map

X2 = np.array([2.0, 0.0])
LEB = constant_measure()
FUNK = zoo.lorentz_funk(2)


def funk_sphere_tilde(a=2.0):
    return ScalarField(lambda x: log((a - 1.0) / (sqrt(dot(x, x)) - 1.0)), label="funk-sphere")


def radius(a=2.0):
    return ScalarField(lambda x: sqrt(dot(x, x)) - a, label="radius")


class TestScalarField:
    def test_dual_differential(self):
        f = radius()
        np.testing.assert_allclose(f.d([3.0, 4.0]), [0.6, 0.8])

    def test_fd_fallback(self):
        """Fields that only accept floats fall back to central differences."""
        f = ScalarField(lambda x: math.hypot(float(x[0]), float(x[1])))
        np.testing.assert_allclose(f.d(np.array([3.0, 4.0])), [0.6, 0.8], rtol=1e-6)

    def test_analytic_differential(self):
        f = ScalarField(lambda x: x[0], lambda x: np.array([1.0, 0.0]))
        np.testing.assert_array_equal(f.d([5.0, 5.0]), [1.0, 0.0])


class TestLegendreGradient:
    def test_euclidean_verbatim(self):
        np.testing.assert_array_equal(legendre_gradient(zoo.euclidean(2), X2, [0.3, -2.0]), [0.3, -2.0])

    def test_funk_unit_gradient(self):
        f = funk_sphere_tilde()
        g = legendre_gradient(FUNK, X2, f.d(X2))
        assert FUNK.F(X2, g) == pytest.approx(1.0, abs=1e-7)
        np.testing.assert_allclose(g, [-1.0, 0.0], atol=1e-12)

    def test_round_trip(self):
        df = np.array([-0.7, 0.2])
        g = legendre_gradient(FUNK, [2.0, 0.3], df)
        assert legendre_residual(FUNK, [2.0, 0.3], g, df) <= 1e-8

    def test_uniqueness_from_many_seeds(self, rng):
        """Eight admissible initializations converge to the same point."""
        x = np.array([2.0, 0.3])
        df = funk_sphere_tilde().d(x)
        sols = []
        while len(sols) < 8:
            seed = -x / np.linalg.norm(x) + 0.25 * rng.standard_normal(2)
            if FUNK.is_admissible(x, seed, 0.01):
                sols.append(legendre_gradient(FUNK, x, df, init=seed))
        np.testing.assert_allclose(sols, np.broadcast_to(sols[0], (8, 2)), atol=1e-10)

    def test_quartic(self):
        m = zoo.minkowski_quartic(2)
        df = np.array([0.4, 0.9])
        g = legendre_gradient(m, X2, df)
        _, L, _ = legendre_map(m, X2, g)
        np.testing.assert_allclose(L, df, atol=1e-10)

    def test_out_of_range(self):
        """A covector positive on the Funk cone direction has no preimage there."""
        with pytest.raises(LegendreOutOfRange):
            legendre_gradient(FUNK, X2, [1.0, 0.0])

    @given(st.floats(1.3, 3.5), st.floats(0, 2 * np.pi))
    def test_funk_sphere_normalized(self, r, th):
        x = r * np.array([np.cos(th), np.sin(th)])
        g = legendre_gradient(FUNK, x, funk_sphere_tilde().d(x))
        assert FUNK.F(x, g) == pytest.approx(1.0, abs=1e-7)


class TestBHDensity:
    def test_euclidean(self):
        assert bh_density(zoo.euclidean(2), X2) == 1.0
        assert bh_density(zoo.euclidean(3), np.zeros(3), closed_form=False) == pytest.approx(1.0, rel=3e-3)

    def test_quartic(self):
        sigma = bh_density(zoo.minkowski_quartic(2), np.zeros(2))
        assert sigma == pytest.approx(oracles.quartic_bh_sigma_2d(), rel=1e-2)
        assert sigma == pytest.approx(0.847, abs=2e-3)

    def test_quadrature_error_bound(self):
        """Relative error within 3 / sqrt(quad_samples)."""
        cfg = DEFAULT_CONFIG
        vol = indicatrix_volume(zoo.minkowski_quartic(2), np.zeros(2), cfg)
        assert abs(vol / oracles.l4_ball_area() - 1.0) <= 3.0 / math.sqrt(cfg.quad_samples)

    def test_randers_translated_sphere(self):
        m = zoo.randers_navigation(2, vf.constant([0.5, 0.2]))
        assert bh_density(m, X2, closed_form=False) == pytest.approx(1.0, rel=1e-2)

    def test_deterministic(self):
        m = zoo.minkowski_quartic(2)
        assert bh_density(m, X2) == bh_density(m, X2)

    def test_lorentz_rejected(self):
        with pytest.raises(KindViolation):
            bh_density(FUNK, X2)
        with pytest.raises(KindViolation):
            bh_measure(FUNK)


class TestDistortion:
    def test_euclidean_zero(self):
        assert distortion(zoo.euclidean(2), bh_measure(zoo.euclidean(2)), X2, [1, 2]) == pytest.approx(0.0, abs=1e-15)

    def test_zero_homogeneous(self):
        y = np.array([-1.0, 0.2])
        assert distortion(FUNK, LEB, X2, 2 * y) == pytest.approx(distortion(FUNK, LEB, X2, y), abs=1e-12)

    def test_cross_implementation(self):
        nav = zoo.navigation_induced(zoo.euclidean(2), vf.radial_negative(2), 0.5)
        y = np.array([-1.0, 0.0])
        tau = distortion(FUNK, LEB, X2, y)
        assert math.isfinite(tau)
        assert distortion(nav, LEB, X2, y) == pytest.approx(tau, abs=1e-7)


FINE = NumericsConfig(ode_step=1e-4)


class TestSCurvature:
    def test_euclidean_zero(self):
        assert s_curvature(zoo.euclidean(2), LEB, X2, [0.3, 1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_funk_shift(self):
        assert s_curvature(FUNK, LEB, X2, [-1.0, 0.0]) == pytest.approx(1.5, abs=1e-6)

    def test_funk_3d(self):
        assert s_curvature(zoo.lorentz_funk(3), LEB, [0.0, 0.0, 2.0], [0.1, 0.0, -1.0]) == \
            pytest.approx(2.0 * zoo.lorentz_funk(3).F([0, 0, 2.0], [0.1, 0, -1.0]), abs=1e-6)

    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_homogeneous(self, lam):
        m = zoo.conformal_quartic(2, 1.0)
        mu = bh_measure(m)
        y = np.array([1.0, 0.4])
        s = s_curvature(m, mu, X2, y)
        assert s_curvature(m, mu, X2, lam * y) == pytest.approx(lam * s, rel=1e-6)

    @pytest.mark.parametrize("y", [[-0.5, 0.7], [-0.9, 0.2], [0.6, 0.8]])
    def test_agrees_with_geodesic_probe(self, y):
        m = zoo.conformal_quartic(2, 1.0)
        mu = bh_measure(m)
        x = np.array([1.2, 0.7])
        assert s_curvature(m, mu, x, y) == pytest.approx(s_curvature_probe(m, mu, x, y, FINE), rel=1e-5)

    def test_funk_probe(self):
        assert s_curvature_probe(FUNK, LEB, X2, [-1.0, 0.0]) == pytest.approx(1.5, abs=1e-5)


class TestDivergence:
    def test_constant_field(self):
        assert divergence(LEB, lambda p: np.array([1.0, 2.0]), X2) == pytest.approx(0.0, abs=1e-10)

    def test_identity_field(self):
        assert divergence(LEB, lambda p: p, X2) == pytest.approx(2.0, abs=1e-8)

    def test_weighted(self):
        mu = constant_measure(3.0)
        assert divergence(mu, lambda p: p * p, np.array([1.0, 2.0])) == pytest.approx(6.0, abs=1e-6)


class TestLaplacians:
    def test_quadratic(self):
        f = ScalarField(lambda x: 0.5 * dot(x, x))
        assert laplacian_dmu(zoo.euclidean(3), LEB, f, [0.3, 0.2, 0.1]) == pytest.approx(3.0, abs=1e-6)

    def test_radius(self):
        val = laplacian_dmu(zoo.euclidean(2), LEB, radius(), X2)
        assert val == pytest.approx(oracles.euclidean_sphere_laplacian(2, 2.0), abs=1e-6)

    def test_osculating_equals_dmu_euclidean(self):
        f = radius()
        a = laplacian_dmu(zoo.euclidean(2), LEB, f, [1.5, 1.0])
        b = laplacian_osculating(zoo.euclidean(2), f, [1.5, 1.0])
        assert a == pytest.approx(b, abs=1e-8)

    def test_funk_dmu_oracle(self):
        for x in ([2.0, 0.0], [0.0, 1.7], [2.1, -1.4]):
            r = np.linalg.norm(x)
            val = laplacian_dmu(FUNK, LEB, funk_sphere_tilde(), x)
            assert val == pytest.approx(oracles.funk_sphere_laplacian_dmu(2, r), abs=1e-6)

    def test_funk_osculating_spot(self):
        assert laplacian_osculating(FUNK, funk_sphere_tilde(), X2) == pytest.approx(0.0, abs=1e-6)

    def test_eq024_funk(self):
        """Osculating minus dmu Laplacian equals S along the gradient."""
        f = funk_sphere_tilde()
        x = np.array([1.8, 0.9])
        g = legendre_gradient(FUNK, x, f.d(x))
        gap = laplacian_osculating(FUNK, f, x) - laplacian_dmu(FUNK, LEB, f, x)
        assert gap == pytest.approx(s_curvature(FUNK, LEB, x, g), abs=1e-4)
