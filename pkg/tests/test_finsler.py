"""Fundamental tensor, inner product, signature and homogeneity."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tests import oracles
from zermelo import zoo
from zermelo.errors import DegenerateTensor, DomainViolation
from zermelo.finsler import (
    Kind,
    fundamental_tensor,
    homogeneity_residual,
    inner,
    legendre_map,
    metric_jets,
    signature,
)

X2 = np.array([2.0, 0.0])
Y2 = np.array([-1.0, 0.0])

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)
radii = st.floats(1.2, 4.0, allow_nan=False)


def funk_sample(r, theta, phi):
    """Point at radius r and a direction inside the Funk cone at it."""
    x = r * np.array([np.cos(theta), np.sin(theta)])
    # the cone half-angle about -x is arcsin(1/r); stay well inside it
    half = np.arcsin(1.0 / r)
    ang = theta + np.pi + 0.9 * half * np.sin(phi)
    return x, np.array([np.cos(ang), np.sin(ang)])


# ---------------------------------------------------------------------------
# Fundamental tensor
# ---------------------------------------------------------------------------


class TestFundamentalTensor:
    def test_euclidean_identity(self):
        g = fundamental_tensor(zoo.euclidean(3), [0.1, 2.0, -1.0], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(g.matrix, np.eye(3), atol=1e-14)

    def test_funk_spot_value(self):
        """<(0,1),(0,1)> = -1 for the Lorentz Funk metric at x=(2,0), y~=(-1,0)."""
        assert inner(zoo.lorentz_funk(2), X2, Y2, [0, 1], [0, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_scaling_invariance(self):
        m = zoo.lorentz_funk(2)
        y = np.array([-1.0, 0.2])
        np.testing.assert_allclose(fundamental_tensor(m, X2, 3 * y).matrix,
                                   fundamental_tensor(m, X2, y).matrix, rtol=1e-8)

    def test_symmetric(self):
        g = fundamental_tensor(zoo.minkowski_quartic(3), [0, 0, 0], [1.0, 0.5, -0.3]).matrix
        np.testing.assert_allclose(g, g.T, atol=1e-10)

    def test_outside_cone(self):
        with pytest.raises(DomainViolation):
            fundamental_tensor(zoo.lorentz_funk(2), X2, [1.0, 0.0])

    def test_outside_region(self):
        with pytest.raises(DomainViolation):
            fundamental_tensor(zoo.lorentz_funk(2), [1.0005, 0.0], [-1.0, 0.0])

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            fundamental_tensor(zoo.euclidean(2), [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])

    def test_degenerate(self):
        """The quartic norm is flat along the coordinate axes."""
        with pytest.raises(DegenerateTensor):
            fundamental_tensor(zoo.minkowski_quartic(2), [0, 0], [1.0, 0.0])

    def test_against_fd_of_closed_form(self):
        """Forward-mode Hessian agrees with second differences of the oracle."""
        x, y = np.array([2.5, 0.5]), np.array([-1.0, -0.1])
        h = 1e-4
        expect = np.empty((2, 2))
        e = np.eye(2)
        half = lambda w: 0.5 * oracles.funk_F(x, w) ** 2
        for i in range(2):
            for j in range(2):
                expect[i, j] = (half(y + h * e[i] + h * e[j]) - half(y + h * e[i] - h * e[j])
                                - half(y - h * e[i] + h * e[j]) + half(y - h * e[i] - h * e[j])) / (4 * h * h)
        np.testing.assert_allclose(fundamental_tensor(zoo.lorentz_funk(2), x, y).matrix, expect, atol=1e-6)


class TestInner:
    def test_euclidean_dot(self):
        assert inner(zoo.euclidean(2), [0, 0], [1, 1], [1, 2], [3, 4]) == pytest.approx(11.0)

    def test_euler_identity_funk(self):
        """<y, y>_y = F(x, y)^2."""
        assert inner(zoo.lorentz_funk(2), X2, Y2, Y2, Y2) == pytest.approx(1.0, rel=1e-12)

    def test_sign_flip(self):
        m = zoo.lorentz_funk(2)
        u, v = np.array([0.3, 1.0]), np.array([1.0, -0.2])
        assert inner(m, X2, Y2, -u, v) == pytest.approx(-inner(m, X2, Y2, u, v))

    @given(radii, angles, angles)
    def test_euler_identity_property(self, r, theta, phi):
        m = zoo.lorentz_funk(2)
        x, y = funk_sample(r, theta, phi)
        assert inner(m, x, y, y, y) == pytest.approx(m.F(x, y) ** 2, rel=1e-8)


class TestSignature:
    def test_euclidean(self):
        assert signature(zoo.euclidean(3), [0, 0, 0], [1, 0, 0]) == (3, 0)

    def test_funk_spot(self):
        assert signature(zoo.lorentz_funk(2), X2, Y2) == (1, 1)

    def test_funk_3d(self):
        assert signature(zoo.lorentz_funk(3), [0.0, 2.0, 0.0], [0.05, -1.0, 0.1]) == (1, 2)

    @given(radii, angles, angles)
    def test_funk_property(self, r, theta, phi):
        x, y = funk_sample(r, theta, phi)
        assert signature(zoo.lorentz_funk(2), x, y) == (1, 1)


class TestHomogeneity:
    def test_euclidean(self):
        assert homogeneity_residual(zoo.euclidean(2), [0, 0], [3.0, 4.0]) < 1e-15

    def test_funk(self):
        assert homogeneity_residual(zoo.lorentz_funk(2), X2, Y2, (0.5, 2.0, 10.0)) <= 1e-12

    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_randers_property(self, v1, v2, y1, y2):
        from zermelo import vectorfields as vf
        v = 0.6 * np.array([v1, v2]) / max(1.0, np.hypot(v1, v2))
        y = np.array([y1, y2])
        if np.linalg.norm(y) < 1e-3:
            return
        m = zoo.randers_navigation(2, vf.constant(v))
        assert homogeneity_residual(m, [0.0, 0.0], y) <= 1e-10


class TestCone:
    @given(radii, angles, angles, angles)
    def test_cone_convex(self, r, theta, p1, p2):
        """Midpoints of admissible vectors are admissible."""
        m = zoo.lorentz_funk(2)
        x, y1 = funk_sample(r, theta, p1)
        _, y2 = funk_sample(r, theta, p2)
        assert m.is_admissible(x, 0.5 * (y1 + y2))

    @given(radii, angles, angles, st.floats(0.01, 100.0))
    def test_cone_conic(self, r, theta, phi, lam):
        m = zoo.lorentz_funk(2)
        x, y = funk_sample(r, theta, phi)
        assert m.is_admissible(x, lam * y)


class TestMetricJets:
    def test_shapes_and_values(self):
        """Jets of |y|^2 for the Euclidean metric."""
        f2, dx, hyy, hxy = metric_jets(zoo.euclidean(2), [1.0, 2.0], [0.5, -1.0])
        assert f2 == pytest.approx(1.25)
        np.testing.assert_allclose(dx, 0.0)
        np.testing.assert_allclose(hyy, 2 * np.eye(2), atol=1e-14)
        np.testing.assert_allclose(hxy, 0.0)

    def test_legendre_map_funk(self):
        value, L, g = legendre_map(zoo.lorentz_funk(2), X2, Y2)
        assert value == pytest.approx(0.5)
        np.testing.assert_allclose(L, g @ Y2, atol=1e-12)

    def test_kind(self):
        assert zoo.lorentz_funk(2).kind is Kind.LORENTZ
        assert zoo.euclidean(2).kind is Kind.FINSLER
