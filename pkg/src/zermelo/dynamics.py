"""Geodesic spray, geodesic integration, homothetic flows and the geodesic correspondence."""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import expm

from .diffengine import DEFAULT_CONFIG
from .errors import DegenerateTensor, DomainExit, FlowEscape, HypothesisViolation
from .finsler import Kind, fundamental_tensor, legendre_map, metric_jets, require_admissible
from .navigation import NavigationDatum, fibre_inner, induced_metric
from .vectorfields import VectorFieldSpec

__all__ = [
    "GeodesicRecord",
    "FlowMap",
    "spray_coeffs",
    "integrate_geodesic",
    "alpha_c",
    "flow",
    "fit_dilation",
    "homothety_residual",
    "tensor_homothety_residual",
    "restriction_identity_residual",
    "navigated_geodesic",
    "orthogonality_transport_residual",
]

UNIT_SPEED_GUARD = 1e-4


@dataclass(frozen=True)
class GeodesicRecord:
    """Sampled curve: times ``t`` (K,), positions ``x`` and velocities ``v`` (K, n)."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    speed: np.ndarray
    metric_kind: Kind
    c0: Optional[float] = None

    @property
    def samples(self):
        return list(zip(self.t, self.x, self.v))

    @property
    def speed_drift(self):
        return float(np.max(np.abs(self.speed - self.speed[0])) / abs(self.speed[0]))

    def interpolant(self):
        """C^1 cubic Hermite interpolant of position in t."""
        return CubicHermiteSpline(self.t, self.x, self.v, axis=0)

    def at(self, s):
        """Position and velocity at parameter ``s`` (Hermite interpolation)."""
        if not (min(self.t[0], self.t[-1]) - 1e-12 <= s <= max(self.t[0], self.t[-1]) + 1e-12):
            raise ValueError(f"parameter {s} outside the sampled range")
        spline = self.interpolant()
        return spline(s), spline(s, 1)

    def to_csv(self, extra=None):
        """CSV text with columns t, x1..xn, v1..vn, speed (17 significant digits).

        ``extra`` maps additional column names to arrays of length K.
        """
        n = self.x.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["speed"]
        extra = extra or {}
        header += list(extra)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for k in range(self.t.size):
            row = [self.t[k], *self.x[k], *self.v[k], self.speed[k]]
            row += [extra[name][k] for name in extra]
            writer.writerow([f"{float(val):.17g}" for val in row])
        return buf.getvalue()


def spray_coeffs(m, x, y, cfg=DEFAULT_CONFIG):
    """G^i = 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})."""
    x, y = require_admissible(m, x, y, cfg)
    _, dx, h_yy, h_xy = metric_jets(m, x, y)
    g = 0.5 * h_yy
    scale = np.max(np.abs(g)) ** g.shape[0]
    if not abs(np.linalg.det(g)) >= 1e-12 * scale:
        raise DegenerateTensor(f"fundamental tensor degenerate at ({x}, {y})")
    return 0.25 * np.linalg.solve(g, y @ h_xy - dx)


def _accel(m, x, v):
    _, dx, h_yy, h_xy = metric_jets(m, x, v)
    return -0.5 * np.linalg.solve(0.5 * h_yy, v @ h_xy - dx)


def integrate_geodesic(m, x0, y0, T, cfg=DEFAULT_CONFIG, wind: Optional[VectorFieldSpec] = None,
                       step=None):
    """Fixed-step classical RK4 for x'' = -2 G(x, x').

    Admissibility (with ``cfg.cone_margin``) is checked at every substep; the
    first failure raises :class:`DomainExit` carrying the step start time.
    When ``wind`` is given, ``c0 = <V(x0), y0>_{y0}`` is recorded.
    """
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(y0, dtype=float).copy()
    h0 = cfg.ode_step if step is None else float(step)
    nsteps = max(1, int(math.ceil(abs(T) / h0 - 1e-9)))
    h = T / nsteps

    def check(p, w, t):
        if not (m.region(p) and m.admissible(p, w, cfg.cone_margin)):
            raise DomainExit(f"geodesic left the admissible domain at t = {t:.6g}", t)

    def rhs(p, w, t):
        check(p, w, t)
        return w, _accel(m, p, w)

    ts = [0.0]
    xs = [x.copy()]
    vs = [v.copy()]
    t = 0.0
    for k in range(nsteps):
        k1x, k1v = rhs(x, v, t)
        k2x, k2v = rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v, t)
        k3x, k3v = rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v, t)
        k4x, k4v = rhs(x + h * k3x, v + h * k3v, t)
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = (k + 1) * h
        ts.append(t)
        xs.append(x.copy())
        vs.append(v.copy())
    check(x, v, t)
    xs = np.array(xs)
    vs = np.array(vs)
    speed = np.asarray(m.eval(xs, vs), dtype=float)
    c0 = None
    if wind is not None:
        c0 = fibre_inner(m, xs[0], vs[0], wind(xs[0]))
    return GeodesicRecord(np.array(ts), xs, vs, speed, m.kind, c0)


def alpha_c(c, t):
    """(e^{2ct} - 1) / (2c), and t itself at c = 0."""
    if c == 0.0:
        return t
    return np.expm1(2.0 * c * t) / (2.0 * c)


@dataclass(frozen=True, eq=False)
class FlowMap:
    """Flow Psi_t of a vector field with its dilation constant.

    ``apply(t, x)`` and ``tangent(t, x, u)`` are exact matrix exponentials for
    linear generators and RK4 integrations (with the variational equation for
    the tangent map) otherwise.
    """

    generator: VectorFieldSpec
    dilation_c: Optional[float]
    step: float = 1e-3
    region: Callable = lambda x: True

    def _integrate(self, t, x, with_jac):
        n = self.generator.dim
        nsteps = max(1, int(math.ceil(abs(t) / self.step - 1e-9)))
        h = t / nsteps
        J = np.eye(n)
        V = self.generator
        for _ in range(nsteps):
            if with_jac:
                k1, K1 = V(x), V.jacobian(x) @ J
                p2 = x + 0.5 * h * k1
                k2, K2 = V(p2), V.jacobian(p2) @ (J + 0.5 * h * K1)
                p3 = x + 0.5 * h * k2
                k3, K3 = V(p3), V.jacobian(p3) @ (J + 0.5 * h * K2)
                p4 = x + h * k3
                k4, K4 = V(p4), V.jacobian(p4) @ (J + h * K3)
                J = J + h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)
            else:
                k1 = V(x)
                k2 = V(x + 0.5 * h * k1)
                k3 = V(x + 0.5 * h * k2)
                k4 = V(x + h * k3)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not (np.all(np.isfinite(x)) and self.region(x)):
                raise FlowEscape(f"flow left the working region before t = {t}")
        return x, J

    def apply(self, t, x):
        x = np.asarray(x, dtype=float)
        A = self.generator.generator_matrix
        if A is not None:
            out = expm(A * t) @ x
        elif self.generator.kind == "constant":
            out = x + t * self.generator.vector
        else:
            out, _ = self._integrate(t, x, with_jac=False)
        if not self.region(out):
            raise FlowEscape(f"flow left the working region at t = {t}")
        return out

    def jacobian(self, t, x):
        A = self.generator.generator_matrix
        if A is not None:
            return expm(A * t)
        if self.generator.kind == "constant":
            return np.eye(self.generator.dim)
        return self._integrate(t, np.asarray(x, dtype=float), with_jac=True)[1]

    def tangent(self, t, x, u):
        return self.jacobian(t, x) @ np.asarray(u, dtype=float)


def flow(V: VectorFieldSpec, cfg=DEFAULT_CONFIG, dilation_c=None, region=None):
    kwargs = {"step": cfg.ode_step}
    if region is not None:
        kwargs["region"] = region
    return FlowMap(V, dilation_c, **kwargs)


def fit_dilation(m, flowmap, samples, ts=(-0.3, -0.1, 0.1, 0.3)):
    """Least-squares c in ln(F(Psi x, Psi_* y) / F(x, y)) = -2 c t.

    Returns ``(c, max_abs_log_residual)``.
    """
    rows = []
    for x, y in samples:
        f0 = m.F(x, y)
        for t in ts:
            ft = m.F(flowmap.apply(t, x), flowmap.tangent(t, x, y))
            rows.append((t, math.log(ft / f0)))
    tt = np.array([r[0] for r in rows])
    ll = np.array([r[1] for r in rows])
    c = -float(tt @ ll) / (2.0 * float(tt @ tt))
    return c, float(np.max(np.abs(ll + 2.0 * c * tt)))


def homothety_residual(m, flowmap, x, y, t):
    """Relative residual of F(Psi_t x, Psi_* y) = e^{-2ct} F(x, y)."""
    c = flowmap.dilation_c
    expected = math.exp(-2.0 * c * t) * m.F(x, y)
    got = m.F(flowmap.apply(t, x), flowmap.tangent(t, x, y))
    return abs(got - expected) / expected


def tensor_homothety_residual(m, flowmap, x, y, u, v, t, cfg=DEFAULT_CONFIG):
    """|<Psi_* u, Psi_* v>_{Psi_* y} - e^{-4ct} <u, v>_y|."""
    c = flowmap.dilation_c
    J = flowmap.jacobian(t, x)
    xt = flowmap.apply(t, x)
    lhs = fundamental_tensor(m, xt, J @ y, cfg)(J @ u, J @ v)
    rhs = math.exp(-4.0 * c * t) * fundamental_tensor(m, x, y, cfg)(u, v)
    return abs(lhs - rhs)


def _unit_inner_profile(m, V, geo):
    vals = []
    for x, v in zip(geo.x, geo.v):
        w = v / m.F(x, v)
        vals.append(fibre_inner(m, x, w, V(x)))
    return np.array(vals)


def _require_unit(geo):
    if abs(geo.speed[0] - 1.0) > UNIT_SPEED_GUARD or geo.speed_drift > UNIT_SPEED_GUARD:
        raise HypothesisViolation("curve is not a unit-speed geodesic within the drift guard")


def restriction_identity_residual(m, V, c, geo):
    """max |<V(gamma), gamma'>_{gamma'} - (c0 - 2 c t)| along a unit-speed geodesic."""
    _require_unit(geo)
    prof = _unit_inner_profile(m, V, geo)
    return float(np.max(np.abs(prof - (prof[0] - 2.0 * c * geo.t))))


def _c0(d, geo):
    x, v = geo.x[0], geo.v[0]
    return fibre_inner(d.base_metric, x, v / d.base_metric.F(x, v), d.V(x))


def _navigated_point(d, fl, geo, t):
    c = d.dilation_c
    s = alpha_c(c, t)
    p, w = geo.at(s)
    w = w / d.base_metric.F(p, w)
    J = fl.jacobian(t, p)
    xt = fl.apply(t, p)
    vel = math.exp(2.0 * c * t) * (J @ w) + d.V(xt)
    return p, w, J, xt, vel


def navigated_geodesic(d: NavigationDatum, geo: GeodesicRecord, T, cfg=DEFAULT_CONFIG,
                       tilde=None, samples=51):
    """Sample gamma~(t) = Psi_t(gamma(alpha_c(t))) on [0, T].

    ``samples`` is a count of equispaced times or an explicit array of times.

    ``geo`` must be a unit-speed F-geodesic whose parameter range covers
    ``[0, alpha_c(T)]``.  The velocity is ``Psi_*(d/dt gamma(alpha_c(t))) + V``.
    The returned record's speed column holds F~(gamma~, gamma~').
    """
    if d.dilation_c is None:
        raise HypothesisViolation("navigated geodesics need a homothetic wind")
    _require_unit(geo)
    c0 = _c0(d, geo)
    if not c0 < -1.0:
        raise HypothesisViolation(f"c0 = {c0:.6g} is not < -1")
    tilde = induced_metric(d, "strong") if tilde is None else tilde
    fl = flow(d.wind, cfg, d.dilation_c)
    if np.ndim(samples) == 0:
        ts = np.linspace(0.0, T, int(samples))
    else:
        ts = np.asarray(samples, dtype=float)
    xs, vs = [], []
    for t in ts:
        _, _, _, xt, vel = _navigated_point(d, fl, geo, t)
        xs.append(xt)
        vs.append(vel)
    xs = np.array(xs)
    vs = np.array(vs)
    speed = np.array([tilde.F(p, w) for p, w in zip(xs, vs)])
    return GeodesicRecord(ts, xs, vs, speed, Kind.LORENTZ, c0)


def orthogonality_transport_residual(d, geo, t, v1, v2, cfg=DEFAULT_CONFIG, tilde=None):
    """Residuals of the transported orthogonality and tensor scaling along gamma~.

    Checks ``<Psi_* v_i, gamma~'>~ = 0`` and
    ``<Psi_* v1, Psi_* v2>~ = e^{-2ct} / (c0 + 1) <v1, v2>`` at ``gamma~(t)``;
    returns the larger absolute residual.
    """
    if d.dilation_c is None:
        raise HypothesisViolation("orthogonality transport needs a homothetic wind")
    _require_unit(geo)
    c0 = _c0(d, geo)
    if not c0 < -1.0:
        raise HypothesisViolation(f"c0 = {c0:.6g} is not < -1")
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if not (np.any(v1) or np.any(v2)):
        return 0.0
    F = d.base_metric
    tilde = induced_metric(d, "strong") if tilde is None else tilde
    fl = flow(d.wind, cfg, d.dilation_c)
    p, w, J, xt, vel = _navigated_point(d, fl, geo, t)
    _, _, g = legendre_map(F, p, w)
    for vi in (v1, v2):
        if abs(vi @ g @ w) > 1e-8 * max(1.0, np.linalg.norm(vi)):
            raise HypothesisViolation("v1 and v2 must be orthogonal to the geodesic direction")
    _, _, gt = legendre_map(tilde, xt, vel)
    u1, u2 = J @ v1, J @ v2
    ortho = max(abs(u1 @ gt @ vel), abs(u2 @ gt @ vel))
    expected = math.exp(-2.0 * d.dilation_c * t) / (c0 + 1.0) * (v1 @ g @ v2)
    return float(max(ortho, abs(u1 @ gt @ u2 - expected)))
