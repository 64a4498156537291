"""Transnormal and isoparametric checks and the level-set correspondence f -> f~.

Given a navigation datum (F, V) with homothetic wind of dilation ``c`` and a
normalized transnormal ``f`` with ``<grad f, V> < -1`` near ``x0``, the
corresponding function ``f~`` on the navigated metric has level sets
``f~^{-1}(t) = Psi_t(f^{-1}(alpha_c(t)))``.  Pointwise this is the scalar
equation ``f(Psi_{-t}(x~)) = alpha_c(t)`` in ``t``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .calculus import (
    ScalarField,
    bh_measure,
    laplacian_dmu,
    laplacian_osculating,
    legendre_gradient,
)
from .diffengine import DEFAULT_CONFIG, dot, sqrt
from .dynamics import FlowMap, alpha_c, flow
from .errors import (
    EmptyLevelSet,
    FlowEscape,
    HypothesisViolation,
    RootNotBracketed,
    ZermeloError,
)
from .navigation import NavigationDatum, fibre_inner, induced_metric
from .report import VerificationReport, composite

__all__ = [
    "LevelSetSample",
    "CorrespondenceContext",
    "make_context",
    "sphere_field",
    "affine_field",
    "choose_sign",
    "sample_level_set",
    "transnormal_residual",
    "isoparametric_residual",
    "psi_levelmap_jacobian_sign",
    "levelmap",
    "levelmap_tangent",
    "correspond_value",
    "tilde_field",
    "verify_gradient_correspondence",
    "laplacian_relation_terms",
    "verify_laplacian_relation_dmu",
    "verify_laplacian_relation_osc",
    "verify_theorem",
]

T_MAX = 2.0
SCAN_SUBDIVISIONS = 64
LEVEL_TOL = 1e-8
TRANSNORMAL_TOL = 1e-5
ISOPARAMETRIC_TOL = 1e-3
ZERO_LEVEL_TOL = 1e-8
CLOSED_FORM_TOL = 1e-6


# scalar field families ------------------------------------------------------

def sphere_field(a, n, sign=1.0, center=None):
    """sign * (|x - center| - a), normalized for the Euclidean metric."""
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def evaluate(x):
        d = x - center
        return sign * (sqrt(dot(d, d)) - a)

    def differential(x):
        d = x - center
        return sign * d / np.linalg.norm(d)

    return ScalarField(evaluate, differential, label=f"sphere(a={a}, sign={sign:+g})")


def affine_field(m, normal, x0):
    """Affine function vanishing at ``x0`` with differential proportional to ``normal``.

    The covector is rescaled so that the gradient has unit length for ``m``,
    which normalizes the function when ``m`` is x-independent.
    """
    normal = np.asarray(normal, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    grad = legendre_gradient(m, x0, normal)
    ell = normal / m.F(x0, grad)

    def evaluate(x):
        return dot(x - x0, ell)

    return ScalarField(evaluate, lambda x: ell.copy(), label=f"affine{tuple(np.round(ell, 6))}")


def _negated(f):
    diff = None if f.differential is None else (lambda x: -f.differential(x))
    return ScalarField(lambda x: -f.eval(x), diff, label=f"-{f.label}")


def _wind_pairing(datum, f, x, cfg):
    F = datum.base_metric
    grad = legendre_gradient(F, x, f.d(x), cfg)
    return fibre_inner(F, x, grad, datum.V(x)), grad


def choose_sign(datum, f, x0, cfg=DEFAULT_CONFIG):
    """Return whichever of ``f`` and ``-f`` has ``<grad f, V>_{grad f} < -1`` at ``x0``."""
    for cand in (f, _negated(f)):
        if _wind_pairing(datum, cand, x0, cfg)[0] < -1.0:
            return cand
    raise HypothesisViolation(f"neither sign of {f.label} satisfies <grad f, V> < -1 at {x0}")


# context --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrespondenceContext:
    """Hypotheses and derived objects for the level-set correspondence."""

    datum: NavigationDatum
    base_field: ScalarField
    flow: FlowMap
    c: float
    x0: np.ndarray
    tilde: object
    radius: float = 0.4
    region: Callable = field(default=lambda x: True)

    @property
    def dim(self):
        return self.datum.dim


def make_context(datum, f, x0, cfg=DEFAULT_CONFIG, tilde=None, radius=0.4, region=None, c=None):
    """Validate the hypotheses at ``x0`` and bundle the correspondence data.

    ``c`` overrides the datum's dilation (used for fitted, non-homothetic winds).
    """
    x0 = np.asarray(x0, dtype=float)
    c = datum.dilation_c if c is None else float(c)
    if c is None:
        raise HypothesisViolation("the correspondence needs a dilation constant")
    if abs(f(x0)) > 1e-7:
        raise HypothesisViolation(f"f(x0) = {f(x0):.3g} is not 0")
    pairing, grad = _wind_pairing(datum, f, x0, cfg)
    if abs(datum.base_metric.F(x0, grad) - 1.0) > 1e-7:
        raise HypothesisViolation("f is not normalized at x0")
    if not pairing < -1.0:
        raise HypothesisViolation(f"<grad f, V> = {pairing:.6g} is not < -1 at x0")
    if tilde is None:
        tilde = induced_metric(datum, "strong", probe_points=[x0])
    region = (lambda x: True) if region is None else region
    fl = flow(datum.wind, cfg, c)
    return CorrespondenceContext(datum, f, fl, c, x0, tilde, radius, region)


# level sets -----------------------------------------------------------------

@dataclass(frozen=True)
class LevelSetSample:
    level: float
    points: np.ndarray
    field: ScalarField


def _project(f, p, level, iters=60):
    for _ in range(iters):
        r = f(p) - level
        if abs(r) <= 1e-14 * (1.0 + abs(level)):
            break
        g = f.d(p)
        p = p - r * g / float(g @ g)
    return p


def sample_level_set(f, level, x0, count, radius=0.4, rng=None, region=None, max_tries=None):
    """Points on ``f = level`` within ``radius`` of ``x0``.

    Seeds are uniform in the ball and projected along the coordinate gradient
    of ``f`` by Newton's method; seeds that fail or land outside the ball or
    ``region`` are discarded.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    region = (lambda x: True) if region is None else region
    max_tries = 50 * count if max_tries is None else max_tries
    pts = []
    for _ in range(max_tries):
        if len(pts) == count:
            break
        u = rng.standard_normal(n)
        u *= radius * rng.random() ** (1.0 / n) / np.linalg.norm(u)
        try:
            p = _project(f, x0 + u, level)
            ok = abs(f(p) - level) <= LEVEL_TOL * 1e-2
        except (ZermeloError, ValueError, ArithmeticError):
            continue
        if ok and np.linalg.norm(p - x0) <= radius and region(p):
            pts.append(p)
    if len(pts) < count:
        raise EmptyLevelSet(f"found {len(pts)} of {count} points on level {level} near {x0}")
    return LevelSetSample(float(level), np.array(pts), f)


def _gradients(m, f, points, cfg):
    out = []
    for p in points:
        try:
            out.append(legendre_gradient(m, p, f.d(p), cfg))
        except ZermeloError as exc:
            exc.sample = p
            raise
    return np.array(out)


def transnormal_residual(m, f, levels, samples_per_level, cfg=DEFAULT_CONFIG, x0=None,
                         radius=0.4, rng=None, region=None):
    """Per-level standard deviation of F(x, grad f(x)); passes at 1e-5."""
    rng = np.random.default_rng(0) if rng is None else rng
    devs, n_pts = [], 0
    for level in levels:
        s = sample_level_set(f, level, x0, samples_per_level, radius, rng, region)
        grads = _gradients(m, f, s.points, cfg)
        norms = np.asarray(m.eval(s.points, grads), dtype=float)
        devs.append(float(np.std(norms)))
        n_pts += len(s.points)
    return VerificationReport.from_residuals(
        "transnormal", devs, TRANSNORMAL_TOL, samples=[{"level": lv} for lv in levels], n_samples=n_pts)


def isoparametric_residual(m, f, levels, samples_per_level, variant="dmu", cfg=DEFAULT_CONFIG,
                           mu=None, x0=None, radius=0.4, rng=None, region=None):
    """Per-level standard deviation of the chosen Laplacian; passes at 1e-3.

    ``variant`` is ``"dmu"`` (needs ``mu``) or ``"osculating"``.  Raises
    :class:`HypothesisViolation` if ``f`` is not transnormal on the samples.
    """
    if variant not in ("dmu", "osculating"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "dmu" and mu is None:
        raise ValueError("the dmu variant needs a measure")
    rng = np.random.default_rng(0) if rng is None else rng
    devs, n_pts = [], 0
    for level in levels:
        s = sample_level_set(f, level, x0, samples_per_level, radius, rng, region)
        grads = _gradients(m, f, s.points, cfg)
        norms = np.asarray(m.eval(s.points, grads), dtype=float)
        if np.std(norms) > TRANSNORMAL_TOL:
            raise HypothesisViolation(f"f is not transnormal on level {level}")
        vals = [_laplacian(m, f, p, g, variant, mu, cfg) for p, g in zip(s.points, grads)]
        devs.append(float(np.std(vals)))
        n_pts += len(s.points)
    return VerificationReport.from_residuals(
        f"isoparametric-{variant}", devs, ISOPARAMETRIC_TOL,
        samples=[{"level": lv} for lv in levels], n_samples=n_pts)


def _laplacian(m, f, p, grad, variant, mu, cfg):
    if variant == "dmu":
        return laplacian_dmu(m, mu, f, p, cfg, init=grad)
    return laplacian_osculating(m, f, p, cfg, init=grad)


# level map ------------------------------------------------------------------

def _level_time(c, value):
    # inverse of alpha_c
    if c == 0.0:
        return value
    return math.log1p(2.0 * c * value) / (2.0 * c)


def psi_levelmap_jacobian_sign(ctx, x, cfg=DEFAULT_CONFIG):
    """det of the level-map tangent on the zero level, 1 + <grad f, V>_{grad f}."""
    x = np.asarray(x, dtype=float)
    if abs(ctx.base_field(x)) > 1e-8:
        raise ValueError("x must lie on the zero level of f")
    pairing, _ = _wind_pairing(ctx.datum, ctx.base_field, x, cfg)
    det = 1.0 + pairing
    if not det < 0.0:
        raise HypothesisViolation(f"level map is not orientation reversing at {x} (det {det:.6g})")
    return det


def levelmap(ctx, x):
    """Psi(x) = Psi_tau(x) with alpha_c(tau) = f(x)."""
    x = np.asarray(x, dtype=float)
    return ctx.flow.apply(_level_time(ctx.c, ctx.base_field(x)), x)


def levelmap_tangent(ctx, x, w):
    """Tangent map of Psi: (Psi_tau)_* w + V(Psi_tau x) df(w) e^{-2c tau}."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    tau = _level_time(ctx.c, ctx.base_field(x))
    xt = ctx.flow.apply(tau, x)
    df = ctx.base_field.d(x)
    return ctx.flow.tangent(tau, x, w) + ctx.datum.V(xt) * float(df @ w) * math.exp(-2.0 * ctx.c * tau)


# correspondence -------------------------------------------------------------

def _backward_grid(ctx, x):
    """Psi_{-t}(x) on the scan grid, marching outward from t = 0 while defined."""
    ts = np.linspace(-T_MAX, T_MAX, SCAN_SUBDIVISIONS + 1)
    mid = SCAN_SUBDIVISIONS // 2
    pts = [None] * ts.size
    pts[mid] = x
    for direction in (1, -1):
        k = mid
        while 0 <= k + direction < ts.size:
            nxt = k + direction
            try:
                p = ctx.flow.apply(-(ts[nxt] - ts[k]), pts[k])
            except FlowEscape:
                break
            if not np.all(np.isfinite(p)):
                break
            pts[nxt] = p
            k = nxt
    return ts, pts


def _residual(ctx, t, p):
    try:
        val = ctx.base_field(p) - alpha_c(ctx.c, t)
    except (ZermeloError, ValueError, ArithmeticError):
        return np.nan
    return val if np.isfinite(val) else np.nan


def correspond_value(ctx, x_tilde, cfg=DEFAULT_CONFIG):
    """f~(x~): the t in [-2, 2] with f(Psi_{-t}(x~)) = alpha_c(t).

    A 64-interval sign scan brackets the root, Brent's method refines it.
    Raises :class:`RootNotBracketed` without a sign change and
    :class:`HypothesisViolation` when the scan finds several roots.
    """
    x = np.asarray(x_tilde, dtype=float)
    f0 = ctx.base_field(x)
    if f0 == 0.0:
        return 0.0
    ts, pts = _backward_grid(ctx, x)
    vals = np.array([np.nan if p is None else _residual(ctx, t, p) for t, p in zip(ts, pts)])
    brackets = []
    for k in range(ts.size - 1):
        a, b = vals[k], vals[k + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            brackets.append((k, k))
        elif a * b < 0.0:
            brackets.append((k, k + 1))
    if vals[-1] == 0.0:
        brackets.append((ts.size - 1, ts.size - 1))
    if not brackets:
        raise RootNotBracketed(f"no level-map root for {x}", (-T_MAX, T_MAX))
    if len(brackets) > 1:
        raise HypothesisViolation(f"level-map equation has {len(brackets)} roots at {x}")
    k, k1 = brackets[0]
    if k == k1:
        return float(ts[k])
    tk, pk = ts[k], pts[k]

    def g(t):
        return ctx.base_field(ctx.flow.apply(-(t - tk), pk)) - alpha_c(ctx.c, t)

    return float(brentq(g, ts[k], ts[k1], xtol=1e-15, rtol=1e-15, maxiter=200))


def tilde_field(ctx, cfg=DEFAULT_CONFIG):
    """f~ as a ScalarField with its implicit differential.

    Differentiating f(Psi_{-t} x) = alpha_c(t) gives
    ``df~ = -(J^T df_p) / (-df_p(V(p)) - e^{2ct})`` with ``p = Psi_{-t} x`` and
    ``J`` the tangent map of ``Psi_{-t}``.
    """

    def evaluate(x):
        return correspond_value(ctx, np.asarray(x, dtype=float), cfg)

    def differential(x):
        x = np.asarray(x, dtype=float)
        t = correspond_value(ctx, x, cfg)
        p = ctx.flow.apply(-t, x)
        J = ctx.flow.jacobian(-t, x)
        dfp = ctx.base_field.d(p)
        gt = -float(dfp @ ctx.datum.V(p)) - math.exp(2.0 * ctx.c * t)
        return -(J.T @ dfp) / gt

    return ScalarField(evaluate, differential, label=f"tilde({ctx.base_field.label})")


def _on_level(ctx, x, t):
    x = np.asarray(x, dtype=float)
    if abs(ctx.base_field(x) - alpha_c(ctx.c, t)) > LEVEL_TOL:
        raise ValueError(f"x is not on the level alpha_c({t}) of f")
    return x


def verify_gradient_correspondence(ctx, x, t, cfg=DEFAULT_CONFIG, ftilde=None):
    """|grad~ f~(Psi_t x) - Psi_*((2cf + 1) grad f(x))| for x on level alpha_c(t).

    The left side is an independent Legendre solve for the navigated metric
    applied to the differential of f~.
    """
    x = _on_level(ctx, x, t)
    ftilde = tilde_field(ctx, cfg) if ftilde is None else ftilde
    xt = ctx.flow.apply(t, x)
    lhs = legendre_gradient(ctx.tilde, xt, ftilde.d(xt), cfg)
    F = ctx.datum.base_metric
    grad = legendre_gradient(F, x, ctx.base_field.d(x), cfg)
    rhs = levelmap_tangent(ctx, x, (2.0 * ctx.c * ctx.base_field(x) + 1.0) * grad)
    return float(np.linalg.norm(lhs - rhs))


def laplacian_relation_terms(ctx, x, t, variant="dmu", cfg=DEFAULT_CONFIG, ftilde=None, mu=None):
    """Both sides of the Laplacian correspondence at x on level alpha_c(t).

    ``dmu``: Lap~_mu f~(Psi_t x) vs (2cf + 1) Lap_mu f(x) - 2cn, with mu the
    Busemann-Hausdorff measure of F.  ``osculating``: the osculating
    Laplacians with the constant ``(n - 1) c``.
    """
    x = _on_level(ctx, x, t)
    ftilde = tilde_field(ctx, cfg) if ftilde is None else ftilde
    F = ctx.datum.base_metric
    n = ctx.dim
    c = ctx.c
    fx = ctx.base_field(x)
    xt = ctx.flow.apply(t, x)
    grad = legendre_gradient(F, x, ctx.base_field.d(x), cfg)
    seed = levelmap_tangent(ctx, x, (2.0 * c * fx + 1.0) * grad)
    if variant == "dmu":
        mu = bh_measure(F, cfg) if mu is None else mu
        lhs = laplacian_dmu(ctx.tilde, mu, ftilde, xt, cfg, init=seed)
        rhs = (2.0 * c * fx + 1.0) * laplacian_dmu(F, mu, ctx.base_field, x, cfg, init=grad) - 2.0 * c * n
    elif variant == "osculating":
        lhs = laplacian_osculating(ctx.tilde, ftilde, xt, cfg, init=seed)
        rhs = (2.0 * c * fx + 1.0) * laplacian_osculating(F, ctx.base_field, x, cfg, init=grad) - (n - 1) * c
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return lhs, rhs


def verify_laplacian_relation_dmu(ctx, x, t, cfg=DEFAULT_CONFIG, ftilde=None, mu=None):
    lhs, rhs = laplacian_relation_terms(ctx, x, t, "dmu", cfg, ftilde, mu)
    return abs(lhs - rhs)


def verify_laplacian_relation_osc(ctx, x, t, cfg=DEFAULT_CONFIG, ftilde=None):
    lhs, rhs = laplacian_relation_terms(ctx, x, t, "osculating", cfg, ftilde)
    return abs(lhs - rhs)


def _in_region(ctx):
    tilde = ctx.tilde

    def inside(p):
        return bool(ctx.region(p)) and bool(tilde.region(p))

    return inside


def verify_theorem(ctx, levels=(-0.2, 0.0, 0.2), samples=20, cfg=DEFAULT_CONFIG, rng=None,
                   closed_form: Optional[Callable] = None, closed_samples=200):
    """Composite check that f~ is a normalized isoparametric function for F~.

    Parts: transnormality and unit gradient norm on sampled level sets of f~,
    per-level constancy of both Laplacians, agreement of the zero levels of f
    and f~, and (when ``closed_form`` is given) pointwise agreement with it.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    ftilde = tilde_field(ctx, cfg)
    F = ctx.datum.base_metric
    mu = bh_measure(F, cfg)
    inside = _in_region(ctx)
    norm_dev, unit_err, dmu_dev, osc_dev = [], [], [], []
    n_pts = 0
    for level in levels:
        s = sample_level_set(ftilde, level, ctx.x0, samples, ctx.radius, rng, inside)
        grads = _gradients(ctx.tilde, ftilde, s.points, cfg)
        norms = np.asarray(ctx.tilde.eval(s.points, grads), dtype=float)
        norm_dev.append(float(np.std(norms)))
        unit_err.append(float(np.max(np.abs(norms - 1.0))))
        dmu = [laplacian_dmu(ctx.tilde, mu, ftilde, p, cfg, init=g) for p, g in zip(s.points, grads)]
        osc = [laplacian_osculating(ctx.tilde, ftilde, p, cfg, init=g) for p, g in zip(s.points, grads)]
        dmu_dev.append(float(np.std(dmu)))
        osc_dev.append(float(np.std(osc)))
        n_pts += len(s.points)
    lv = [{"level": v} for v in levels]
    parts = [
        VerificationReport.from_residuals("transnormal", norm_dev, TRANSNORMAL_TOL, lv, n_pts),
        VerificationReport.from_residuals("unit-gradient", unit_err, TRANSNORMAL_TOL, lv, n_pts),
        VerificationReport.from_residuals("dmu-isoparametric", dmu_dev, ISOPARAMETRIC_TOL, lv, n_pts),
        VerificationReport.from_residuals("isoparametric", osc_dev, ISOPARAMETRIC_TOL, lv, n_pts),
    ]
    zero = sample_level_set(ctx.base_field, 0.0, ctx.x0, samples, ctx.radius, rng, inside)
    zres = [abs(correspond_value(ctx, p, cfg)) for p in zero.points]
    parts.append(VerificationReport.from_residuals("zero-level", zres, ZERO_LEVEL_TOL, list(zero.points)))
    if closed_form is not None:
        pts = _ball_points(ctx, closed_samples, rng, inside)
        cres = [abs(correspond_value(ctx, p, cfg) - closed_form(p)) for p in pts]
        parts.append(VerificationReport.from_residuals("closed-form", cres, CLOSED_FORM_TOL, list(pts)))
    return composite("level-set-correspondence", parts)


def _ball_points(ctx, count, rng, inside):
    n = ctx.dim
    pts = []
    while len(pts) < count:
        u = rng.standard_normal(n)
        p = ctx.x0 + u * ctx.radius * rng.random() ** (1.0 / n) / np.linalg.norm(u)
        if inside(p):
            pts.append(p)
    return np.array(pts)
