"""Hyper-dual arithmetic, jets, x-gradients and the numerics config."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zermelo.diffengine import (
    DEFAULT_CONFIG,
    HyperDual,
    NumericsConfig,
    dot,
    exp,
    grad_x,
    hessian,
    jet2,
    log,
    sqrt,
)
from zermelo.errors import DomainViolation, NonFiniteEvaluation

coords = st.floats(-2.0, 2.0, allow_nan=False)


def quadratic(p):
    return p[..., 0] * p[..., 0] + 3.0 * p[..., 0] * p[..., 1] + 5.0 * p[..., 1] * p[..., 1]


def smooth(p):
    return exp(0.3 * p[..., 0]) * sqrt(1.0 + dot(p, p)) + log(2.0 + p[..., 1] * p[..., 1])


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------


class TestJet2:
    def test_quadratic_exact(self):
        """Second derivatives of a quadratic are its constant Hessian."""
        j = jet2(quadratic, [1.0, 2.0], [1.0, 0.0], [0.0, 1.0])
        np.testing.assert_allclose(j.value, 1.0 + 6.0 + 20.0)
        np.testing.assert_allclose(j.d1, 2.0 + 6.0)
        np.testing.assert_allclose(j.d2, 3.0 + 20.0)
        np.testing.assert_allclose([j.d11, j.d12, j.d22], [2.0, 3.0, 10.0])
        assert j.d21 == j.d12

    def test_batched_directions(self):
        """A leading batch axis gives one jet per direction pair."""
        u = np.eye(2)
        j = jet2(quadratic, [0.5, -0.5], u, u)
        np.testing.assert_allclose(j.d11, [2.0, 10.0])
        np.testing.assert_allclose(j.d12, [2.0, 10.0])

    def test_fd_cross_check(self):
        """Forward mode and central differences agree on a smooth map."""
        base = np.array([0.4, -0.7])
        u, v = np.array([1.0, 0.5]), np.array([-0.3, 1.0])
        a = jet2(smooth, base, u, v)
        b = jet2(smooth, base, u, v, mode="fd")
        np.testing.assert_allclose([a.d1, a.d2], [b.d1, b.d2], rtol=1e-8)
        np.testing.assert_allclose([a.d11, a.d12, a.d22], [b.d11, b.d12, b.d22], rtol=1e-4)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            jet2(quadratic, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], mode="complex")

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteEvaluation):
            jet2(lambda p: sqrt(p[..., 0]), [-1.0, 0.0], [1.0, 0.0], [1.0, 0.0])

    @given(st.tuples(coords, coords))
    def test_mixed_partials_symmetric(self, xy):
        u, v = np.array([1.0, 0.2]), np.array([0.3, -1.0])
        a = jet2(smooth, xy, u, v)
        b = jet2(smooth, xy, v, u)
        np.testing.assert_allclose(a.d12, b.d12, rtol=1e-12, atol=1e-12)


class TestHessian:
    def test_quadratic(self):
        value, grad, hess = hessian(quadratic, np.array([1.0, 1.0]))
        assert value == pytest.approx(9.0)
        np.testing.assert_allclose(grad, [5.0, 13.0])
        np.testing.assert_allclose(hess, [[2.0, 3.0], [3.0, 10.0]])

    def test_euclidean_half_square(self):
        """Hessian of |y|^2 / 2 is the identity."""
        _, grad, hess = hessian(lambda y: 0.5 * dot(y, y), np.array([0.3, -1.2, 2.0]))
        np.testing.assert_allclose(grad, [0.3, -1.2, 2.0])
        np.testing.assert_allclose(hess, np.eye(3), atol=1e-15)


class TestGradX:
    def test_dual_matches_fd(self):
        fn = lambda x, y: sqrt(dot(x, x)) * dot(x, y)
        x, y = np.array([1.5, -0.5]), np.array([0.2, 0.7])
        np.testing.assert_allclose(grad_x(fn, x, y), grad_x(fn, x, y, mode="fd"), rtol=1e-8)

    def test_admissibility_guard(self):
        with pytest.raises(DomainViolation):
            grad_x(lambda x, y: dot(x, y), [1.0, 0.0], [1.0, 0.0], admissible=lambda x, y: False)


# ---------------------------------------------------------------------------
# HyperDual arithmetic
# ---------------------------------------------------------------------------


class TestHyperDual:
    def test_product_rule(self):
        x = HyperDual(2.0, 1.0, 1.0, 0.0)
        y = x * x * x
        assert (y.a, y.b, y.c, y.d) == (8.0, 12.0, 12.0, 12.0)

    def test_division_and_power(self):
        x = HyperDual(2.0, 1.0, 1.0, 0.0)
        r = 1.0 / x
        np.testing.assert_allclose([r.a, r.b, r.d], [0.5, -0.25, 0.25])
        p = x ** 0.5
        np.testing.assert_allclose([p.a, p.b, p.d], [np.sqrt(2), 0.5 / np.sqrt(2), -0.25 * 2 ** -1.5])

    def test_ufunc_dispatch(self):
        """numpy ufuncs route through the hyper-dual rules."""
        x = HyperDual(0.5, 1.0, 1.0, 0.0)
        s = np.sin(x)
        np.testing.assert_allclose([s.a, s.b, s.d], [np.sin(0.5), np.cos(0.5), -np.sin(0.5)])


class TestNumericsConfig:
    def test_defaults(self):
        assert DEFAULT_CONFIG.fd_step == 1e-5
        assert DEFAULT_CONFIG.cone_margin == 1e-3
        assert DEFAULT_CONFIG.ode_step == 1e-3

    def test_replace(self):
        cfg = DEFAULT_CONFIG.replace(ode_step=0.01)
        assert cfg.ode_step == 0.01 and DEFAULT_CONFIG.ode_step == 1e-3

    @pytest.mark.parametrize("changes", [
        {"fd_step": 0.0}, {"newton_tol": -1.0}, {"newton_max_iter": 0},
        {"quad_samples": 10}, {"cone_margin": 0.7},
    ])
    def test_validation(self, changes):
        with pytest.raises(ValueError):
            NumericsConfig(**changes)
