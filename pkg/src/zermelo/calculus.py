"""Gradients, Busemann-Hausdorff density, distortion, S-curvature and Laplacians."""

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .diffengine import DEFAULT_CONFIG, HyperDual
from .errors import (
    DegenerateTensor,
    KindViolation,
    LegendreOutOfRange,
    NewtonDivergence,
    NonFiniteEvaluation,
)
from .finsler import Kind, legendre_map, require_admissible

__all__ = [
    "MeasureDescriptor",
    "ScalarField",
    "legendre_gradient",
    "legendre_residual",
    "bh_density",
    "bh_measure",
    "constant_measure",
    "distortion",
    "s_curvature",
    "s_curvature_probe",
    "divergence",
    "laplacian_dmu",
    "laplacian_osculating",
]


@dataclass(frozen=True, eq=False)
class MeasureDescriptor:
    """Smooth measure sigma(x) dx^1 ... dx^n."""

    density: Callable
    label: str = ""

    def __call__(self, x):
        return float(self.density(np.asarray(x, dtype=float)))


def constant_measure(value=1.0, label="lebesgue"):
    return MeasureDescriptor(lambda x: value, label)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A smooth function with an optional analytic differential.

    Without ``differential`` the covector comes from forward-mode
    differentiation when ``eval`` accepts hyper-dual input, and central
    differences otherwise.
    """

    eval: Callable
    differential: Optional[Callable] = None
    label: str = ""
    fd_step: float = 1e-6

    def __call__(self, x):
        return float(self.eval(np.asarray(x, dtype=float)))

    def d(self, x):
        x = np.asarray(x, dtype=float)
        if self.differential is not None:
            return np.asarray(self.differential(x), dtype=float)
        n = x.size
        try:
            out = self.eval(HyperDual(x, np.eye(n), 0.0, 0.0))
            g = np.broadcast_to(np.asarray(out.b, dtype=float), (n,)).copy()
        except (TypeError, AttributeError):
            h = self.fd_step * (1.0 + np.linalg.norm(x))
            eye = np.eye(n)
            g = np.array([(self(x + h * e) - self(x - h * e)) / (2 * h) for e in eye])
        if not np.all(np.isfinite(g)):
            raise NonFiniteEvaluation(f"non-finite differential at {x}")
        return g


# Legendre transform ---------------------------------------------------------

def legendre_residual(m, x, y, df):
    """|L_x(y) - df| in the Euclidean norm of covector components."""
    _, L, _ = legendre_map(m, np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return float(np.linalg.norm(L - np.asarray(df, dtype=float)))


def _initial_guesses(m, x, df, init):
    seeds = []
    if init is not None:
        seeds.append(np.asarray(init, dtype=float))
    if m.kind is Kind.FINSLER:
        seeds.append(np.asarray(df, dtype=float))
        return seeds
    datum = m.datum
    if datum is not None:
        # central ray of the cone: the wind direction
        Vx = datum.V(x)
        seeds.append(Vx / np.linalg.norm(Vx))
        n = x.size
        basis = np.eye(n)
        for k in range(n):
            for s in (0.3, -0.3):
                w = Vx / np.linalg.norm(Vx) + s * basis[k]
                seeds.append(w)
    return seeds


def _newton_legendre(m, x, df, y, cfg):
    scale = max(1.0, float(np.linalg.norm(df)))
    _, L, g = legendre_map(m, x, y)
    r = L - df
    res = float(np.linalg.norm(r))
    for _ in range(cfg.newton_max_iter):
        if res <= cfg.newton_tol * scale:
            return y, res
        try:
            step = np.linalg.solve(g, r)
        except np.linalg.LinAlgError as exc:
            raise DegenerateTensor("singular fundamental tensor in Legendre solve") from exc
        lam = 1.0
        for _ in range(40):
            cand = y - lam * step
            if m.admissible(x, cand, 0.0):
                try:
                    _, Lc, gc = legendre_map(m, x, cand)
                except NonFiniteEvaluation:
                    Lc = None
                if Lc is not None:
                    rc = Lc - df
                    resc = float(np.linalg.norm(rc))
                    if resc < res or resc <= cfg.newton_tol * scale:
                        y, g, r, res = cand, gc, rc, resc
                        break
            lam *= 0.5
        else:
            raise NewtonDivergence("line search failed in the Legendre solve")
    if res <= cfg.newton_tol * scale:
        return y, res
    raise NewtonDivergence(f"Legendre solve stalled at residual {res:.3g}")


def legendre_gradient(m, x, df, cfg=DEFAULT_CONFIG, init=None):
    """Solve L_x(y) = df for y, i.e. the gradient vector of a covector.

    Newton's method on the fibre with Jacobian g and a backtracking line
    search that keeps iterates in the admissible cone.  Initial guesses: the
    caller's ``init``, then (for cone metrics with a navigation datum) the
    wind direction and small tilts of it.  Each seed is rescaled along its ray
    so that ``df(y) = F(y)^2``.
    """
    x = np.asarray(x, dtype=float)
    df = np.asarray(df, dtype=float)
    if m.kind is Kind.FINSLER and m.name == "euclidean":
        return df.copy()
    last = None
    for seed in _initial_guesses(m, x, df, init):
        if not m.is_admissible(x, seed):
            continue
        fs = m.F(x, seed)
        lam = float(df @ seed) / (fs * fs)
        if not lam > 0.0:
            continue
        try:
            y, _ = _newton_legendre(m, x, df, lam * seed, cfg)
        except (NewtonDivergence, DegenerateTensor, NonFiniteEvaluation) as exc:
            last = exc
            continue
        if m.is_admissible(x, y):
            return y
    msg = f"no admissible Legendre pre-image of {df} at {x}"
    if last is not None:
        msg += f" (last failure: {last})"
    raise LegendreOutOfRange(msg)


# Busemann-Hausdorff measure -------------------------------------------------

def _unit_ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def indicatrix_volume(m, x, cfg=DEFAULT_CONFIG):
    """Volume of {y : F(x, y) <= 1} by unscrambled Halton points in a box."""
    x = np.asarray(x, dtype=float)
    n = m.dim
    eye = np.eye(n)
    reach = max(1.0 / m.F(x, s * e) for e in eye for s in (1.0, -1.0))
    half = 2.0 * reach
    pts = qmc.Halton(d=n, scramble=False).random(cfg.quad_samples + 1)[1:]
    pts = (2.0 * pts - 1.0) * half
    vals = np.asarray(m.eval(x, pts), dtype=float)
    inside = np.count_nonzero(vals <= 1.0)
    return (2.0 * half) ** n * inside / pts.shape[0]


def bh_density(m, x, cfg=DEFAULT_CONFIG, closed_form=True):
    """sigma(x) = Vol(unit ball) / Vol(indicatrix body).

    A metric's exact density hook is used when present and ``closed_form`` is
    true; otherwise the indicatrix volume is integrated numerically.
    """
    if m.kind is not Kind.FINSLER:
        raise KindViolation("the Busemann-Hausdorff measure needs a positive-definite metric")
    if closed_form and m.bh_density is not None:
        return float(m.bh_density(np.asarray(x, dtype=float)))
    return _unit_ball_volume(m.dim) / indicatrix_volume(m, x, cfg)


def bh_measure(m, cfg=DEFAULT_CONFIG):
    """Busemann-Hausdorff measure of a Finsler metric as a MeasureDescriptor."""
    if m.kind is not Kind.FINSLER:
        raise KindViolation("the Busemann-Hausdorff measure needs a positive-definite metric")
    if m.bh_density is not None:
        return MeasureDescriptor(m.bh_density, f"bh({m.name})")
    if m.x_independent:
        sigma = bh_density(m, np.zeros(m.dim), cfg)
        return MeasureDescriptor(lambda x: sigma, f"bh({m.name})")
    return MeasureDescriptor(lambda x: bh_density(m, x, cfg), f"bh({m.name})")


# distortion and S-curvature -------------------------------------------------

def distortion(m, mu, x, y, cfg=DEFAULT_CONFIG):
    """tau(x, y) = ln(sqrt|det g(x, y)| / sigma(x))."""
    x, y = require_admissible(m, x, y, cfg)
    _, _, g = legendre_map(m, x, y)
    det = abs(np.linalg.det(g))
    if not det > 0.0:
        raise DegenerateTensor(f"degenerate tensor at ({x}, {y})")
    return 0.5 * math.log(det) - math.log(mu(x))


def s_curvature(m, mu, x, y, cfg=DEFAULT_CONFIG):
    """Derivative of the distortion along the geodesic spray at (x, y).

    Fourth-order central difference of ``tau`` along the spray vector
    ``(y, -2G(x, y))`` on the tangent bundle, with parameter step
    ``cfg.fd_step / |y|``. Since ``tau`` is 0-homogeneous the result is
    1-homogeneous in ``y`` up to round-off.
    """
    from .dynamics import spray_coeffs

    x, y = require_admissible(m, x, y, cfg)
    # probes only need the open cone, not the sampling margin
    probe = replace(cfg, cone_margin=min(cfg.cone_margin, 1e-9))
    s = cfg.fd_step / float(np.linalg.norm(y))
    G = spray_coeffs(m, x, y, cfg)

    def tau(k):
        return distortion(m, mu, x + k * s * y, y - 2.0 * k * s * G, probe)

    return (8.0 * (tau(1) - tau(-1)) - (tau(2) - tau(-2))) / (12.0 * s)


def s_curvature_probe(m, mu, x, y, cfg=DEFAULT_CONFIG):
    """S by a symmetric difference of ``tau`` at geodesic probes ``t = +-ode_step``.

    Independent cross-check of :func:`s_curvature`; not exactly homogeneous in ``y``.
    """
    from .dynamics import integrate_geodesic

    x, y = require_admissible(m, x, y, cfg)
    h = cfg.ode_step
    fwd = integrate_geodesic(m, x, y, h, cfg, step=h)
    bwd = integrate_geodesic(m, x, y, -h, cfg, step=h)
    tp = distortion(m, mu, fwd.x[-1], fwd.v[-1], cfg)
    tm = distortion(m, mu, bwd.x[-1], bwd.v[-1], cfg)
    return (tp - tm) / (2.0 * h)


# divergence and Laplacians --------------------------------------------------

def _stencil(x, cfg):
    h = cfg.fd_step * (1.0 + float(np.linalg.norm(x)))
    eye = np.eye(x.size)
    return h, [(k, x + h * eye[k], x - h * eye[k]) for k in range(x.size)]


def divergence(mu, X, x, cfg=DEFAULT_CONFIG):
    """(1 / sigma) sum_i d_i(sigma X^i) by central differences."""
    x = np.asarray(x, dtype=float)
    h, pts = _stencil(x, cfg)
    total = 0.0
    for k, xp, xm in pts:
        total += (mu(xp) * X(xp)[k] - mu(xm) * X(xm)[k]) / (2.0 * h)
    return total / mu(x)


def _weighted_divergence(pairs, x, h):
    # pairs[k] = ((sigma+, X+), (sigma-, X-)) for axis k; fixed summation order
    total = 0.0
    for k, ((sp, Xp), (sm, Xm)) in enumerate(pairs):
        total += (sp * Xp[k] - sm * Xm[k]) / (2.0 * h)
    return total


def laplacian_dmu(m, mu, f, x, cfg=DEFAULT_CONFIG, init=None):
    """div_mu of the gradient field of ``f``; gradients solved afresh per stencil point."""
    x = np.asarray(x, dtype=float)
    g0 = legendre_gradient(m, x, f.d(x), cfg, init)

    def X(p):
        return legendre_gradient(m, p, f.d(p), cfg, g0)

    return divergence(mu, X, x, cfg)


def _osc_density(m, p, grad):
    _, _, g = legendre_map(m, p, grad)
    return math.sqrt(abs(np.linalg.det(g)))


def laplacian_osculating(m, f, x, cfg=DEFAULT_CONFIG, init=None):
    """Laplacian for the measure of the osculating metric g_{grad f}."""
    x = np.asarray(x, dtype=float)
    g0 = legendre_gradient(m, x, f.d(x), cfg, init)
    h, pts = _stencil(x, cfg)
    pairs = []
    for k, xp, xm in pts:
        side = []
        for p in (xp, xm):
            grad = legendre_gradient(m, p, f.d(p), cfg, g0)
            side.append((_osc_density(m, p, grad), grad))
        pairs.append(tuple(side))
    return _weighted_divergence(pairs, x, h) / _osc_density(m, x, g0)
