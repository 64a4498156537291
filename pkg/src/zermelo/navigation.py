"""Zermelo navigation: forward map, its inverse, cone membership, tensor relations.

For a datum (F, V) the navigated metric is defined implicitly by
``F~(x, y + F(x, y) V(x)) = F(x, y)``.  Given ``y~`` the unknown scale
``t = F~(x, y~)`` solves the scalar fixed point ``t = F(x, y~ - t V(x))``.
The map ``h(t) = F(x, y~ - t V) - t`` is convex, which makes Newton's method
monotone from the right of the root we want:

* strong wind (``F(x, -V) > 1``): ``h`` has two roots on the cone; the
  Lorentz branch is the larger one, where ``h' > 0``.  Starting from the
  triangle-inequality bound ``F(x, -y~) / (F(x, -V) - 1)`` Newton decreases
  monotonically onto it.  Meeting ``h' <= 0`` before convergence proves there
  is no such root, i.e. ``y~`` is outside the cone.
* weak wind (``F(x, -V) < 1``): ``h`` is decreasing with a single root;
  Newton from ``t = 0`` increases monotonically onto it.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .diffengine import DEFAULT_CONFIG, HyperDual, real_part
from .errors import ConeViolation, NavigationRegimeViolation, NewtonDivergence, PreConeViolation
from .finsler import Kind, MetricDescriptor, legendre_map
from .vectorfields import VectorFieldSpec

__all__ = [
    "NavigationDatum",
    "wind_strength",
    "fibre_inner",
    "forward_map",
    "inverse_map",
    "cone_membership",
    "navigated_norm",
    "induced_metric",
    "tensor_relation_residual",
]

_EPS = np.finfo(float).eps
_SOLVE_TOL = 8.0 * _EPS
_SOLVE_MAX_ITER = 200
_CHORD_STEPS = 3


@dataclass(frozen=True, eq=False)
class NavigationDatum:
    """Finsler base metric, wind field and (if homothetic) its dilation."""

    base_metric: MetricDescriptor
    wind: VectorFieldSpec
    dilation_c: Optional[float] = None

    def __post_init__(self):
        if self.base_metric.kind is not Kind.FINSLER:
            raise TypeError("navigation needs a Finsler base metric")
        if self.wind.dim != self.base_metric.dim:
            raise ValueError("wind and metric dimensions differ")

    @property
    def dim(self):
        return self.base_metric.dim

    def V(self, x):
        return self.wind(np.asarray(x, dtype=float))


def wind_strength(d, x):
    """F(x, -V(x)); above 1 is the strong-wind (Lorentz) regime."""
    x = np.asarray(x, dtype=float)
    return d.base_metric.F(x, -d.V(x))


def _require_strong(d, x):
    s = wind_strength(d, x)
    if not s > 1.0:
        raise NavigationRegimeViolation(f"F(x, -V(x)) = {s:.6g} <= 1 at x = {x}")
    return s


def fibre_inner(m, x, y, w):
    """<y, w>^F_y, i.e. the Legendre image of y applied to w."""
    f = m.eval(np.asarray(x, dtype=float), HyperDual(y, w, 0.0, 0.0))
    return float(f.a * f.b)


def forward_map(d, x, y, cfg=DEFAULT_CONFIG):
    """y~ = y + F(x, y) V(x).

    In the strong-wind regime ``y`` must lie in the pre-navigation cone
    ``<y, V>_y < -F(x, y)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    F = d.base_metric
    Vx = d.V(x)
    fy = F.F(x, y)
    if wind_strength(d, x) > 1.0 and not fibre_inner(F, x, y, Vx) < -fy:
        raise PreConeViolation(f"<y, V>_y >= -F(x, y) for y = {y} at x = {x}")
    return y + fy * Vx


def _psi_slope(F, x, y, Vx):
    # d/dt F(x, y - t V) at t = 0
    out = F.eval(x, HyperDual(y, -Vx, 0.0, 0.0))
    return np.asarray(out.b, dtype=float)


def navigated_norm(F, x, yt, Vx, strong=True):
    """Real solve of t = F(x, y~ - t V) on arrays; NaN where no admissible root.

    ``x``, ``yt`` and ``Vx`` broadcast along leading axes.
    """
    x = np.asarray(x, dtype=float)
    yt = np.asarray(yt, dtype=float)
    Vx = np.asarray(Vx, dtype=float)
    shape = np.broadcast_shapes(x.shape, yt.shape, Vx.shape)[:-1]
    if strong:
        t = np.asarray(F.eval(x, -yt) / (F.eval(x, -Vx) - 1.0), dtype=float)
        t = np.broadcast_to(t, shape) * (1.0 + 1e-12)
    else:
        t = np.zeros(shape)
    t = np.array(t, dtype=float)
    bad = np.zeros(shape, dtype=bool)
    done = np.zeros(shape, dtype=bool)
    for _ in range(_SOLVE_MAX_ITER):
        y = yt - t[..., None] * Vx
        h = np.asarray(F.eval(x, y), dtype=float) - t
        hp = _psi_slope(F, x, y, Vx) - 1.0
        if strong:
            bad |= (hp <= 0.0) & ~done
        else:
            bad |= (hp >= 0.0) & ~done
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(bad | done, 0.0, h / hp)
        t = t - step
        # stop on a tiny step or a residual at round-off level (ill-conditioned roots oscillate)
        done |= (np.abs(step) <= _SOLVE_TOL * np.abs(t)) | (np.abs(h) <= 2.0 * _EPS * np.abs(t))
        if np.all(done | bad):
            break
    out = np.where(bad | ~done | (t <= 0.0), np.nan, t)
    return out


def _induced_eval(d, strong):
    F = d.base_metric

    def evaluate(x, yt):
        Vx = d.wind(x)
        xr, yr, Vr = real_part(x), real_part(yt), real_part(Vx)
        t = navigated_norm(F, xr, yr, Vr, strong)
        if not isinstance(x, HyperDual) and not isinstance(yt, HyperDual):
            return t if t.ndim else float(t)
        slope = _psi_slope(F, xr, yr - t[..., None] * Vr, Vr)
        # chord iterations in hyper-dual arithmetic with the real slope;
        # each step raises the order of the derivative error by one
        T = t
        for _ in range(_CHORD_STEPS):
            Tv = T[..., None] if isinstance(T, HyperDual) else np.asarray(T)[..., None]
            T = T + (F.eval(x, yt - Tv * Vx) - T) / (1.0 - slope)
        return T

    return evaluate


def cone_membership(d, x, yt, margin=0.0):
    """Whether y~ lies in the admissible cone at x, shrunk by ``margin``.

    y~ is admissible iff the ray ``s y~`` (s > 0) enters the translated
    indicatrix ``V(x) + {F < 1}``; we require it to enter ``{F < 1 - margin}``.
    """
    x = np.asarray(x, dtype=float)
    yt = np.asarray(yt, dtype=float)
    F = d.base_metric
    if not np.any(yt):
        return False
    if wind_strength(d, x) <= 1.0:
        return False
    Vx = d.V(x)
    if F.name == "euclidean":
        b = float(Vx @ yt)
        if b <= 0.0:
            return False
        dist2 = float(Vx @ Vx) - b * b / float(yt @ yt)
        return dist2 < (1.0 - margin) ** 2
    fy = F.F(x, yt)
    s_max = (1.0 + F.F(x, Vx)) / fy
    res = minimize_scalar(
        lambda s: F.F(x, s * yt - Vx),
        bounds=(0.0, s_max),
        method="bounded",
        options={"xatol": 1e-10 * s_max},
    )
    return bool(res.fun < 1.0 - margin)


def inverse_map(d, x, yt, cfg=DEFAULT_CONFIG):
    """Pre-image y of y~ under the forward map (strong-wind regime)."""
    x = np.asarray(x, dtype=float)
    yt = np.asarray(yt, dtype=float)
    _require_strong(d, x)
    if not cone_membership(d, x, yt, cfg.cone_margin):
        raise ConeViolation(f"{yt} is not in the admissible cone at {x}")
    Vx = d.V(x)
    t = float(navigated_norm(d.base_metric, x, yt, Vx, strong=True))
    if not np.isfinite(t):
        raise NewtonDivergence(f"navigation solve failed at x = {x}, y~ = {yt}")
    y = yt - t * Vx
    err = np.linalg.norm(y + d.base_metric.F(x, y) * Vx - yt)
    if err > max(cfg.newton_tol, 1e-13) * max(1.0, np.linalg.norm(yt)) * 10:
        raise NewtonDivergence(f"inverse navigation residual {err:.3g}")
    return y


def induced_metric(d, regime="strong", name="navigation", probe_points=()):
    """Metric induced by navigation with datum ``d``.

    Strong wind yields a Lorentz-Finsler metric on the cone; weak wind a
    Finsler metric.  ``probe_points`` are checked for the regime up front.
    """
    strong = regime == "strong"
    if regime not in ("strong", "weak"):
        raise ValueError(f"unknown regime {regime!r}")
    for p in probe_points:
        s = wind_strength(d, p)
        if strong and not s > 1.0:
            raise NavigationRegimeViolation(f"F(x, -V(x)) = {s:.6g} <= 1 at probe {p}")
        if not strong and not s < 1.0:
            raise NavigationRegimeViolation(f"F(x, -V(x)) = {s:.6g} >= 1 at probe {p}")

    if strong:
        def region(x):
            return wind_strength(d, x) > 1.0

        def admissible(x, y, margin=0.0):
            return cone_membership(d, x, y, margin)
    else:
        def region(x):
            return wind_strength(d, x) < 1.0

        def admissible(x, y, margin=0.0):
            return bool(np.any(np.asarray(y) != 0.0))

    return MetricDescriptor(
        dim=d.dim,
        kind=Kind.LORENTZ if strong else Kind.FINSLER,
        eval=_induced_eval(d, strong),
        admissible=admissible,
        region=region,
        name=name,
        datum=d,
        params={"base": d.base_metric.name, "wind": d.wind.label, "regime": regime},
    )


def _tangent_pairs(g, y, count, rng):
    # random vectors in the g-orthogonal complement of y
    n = y.size
    w = rng.standard_normal((count, 2, n))
    gy = g @ y
    yy = y @ gy
    w = w - np.einsum("kpi,i->kp", w, gy)[..., None] * y / yy
    return w[:, 0], w[:, 1]


def tensor_relation_residual(d, x, y, cfg=DEFAULT_CONFIG, tilde=None, pairs=None,
                             count=8, rng=None, relation="forward"):
    """Residual of the fundamental-tensor relation across navigation.

    With ``F(x, y) = 1`` and ``u, v`` tangent to the indicatrix at ``y``,
    ``relation="forward"`` checks ``<u,v>~_{y~} = <u,v>_y / (1 + <y, V>_y)`` and
    ``relation="inverse"`` checks ``<u,v>_y = <u,v>~_{y~} / (1 - <y~, V>~_{y~})``.
    ``tilde`` is the navigated metric; by default it is built from ``d``.
    Returns the maximum absolute residual over the pairs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    F = d.base_metric
    if abs(F.F(x, y) - 1.0) > 1e-9:
        raise ValueError("y must be F-unit; normalise before calling")
    strong = wind_strength(d, x) > 1.0
    if tilde is None:
        tilde = induced_metric(d, "strong" if strong else "weak")
    yt = forward_map(d, x, y, cfg)
    Vx = d.V(x)
    _, _, g = legendre_map(F, x, y)
    _, Lt, gt = legendre_map(tilde, x, yt)
    if pairs is None:
        rng = np.random.default_rng(0) if rng is None else rng
        us, vs = _tangent_pairs(g, y, count, rng)
    else:
        us = np.array([p[0] for p in pairs], dtype=float)
        vs = np.array([p[1] for p in pairs], dtype=float)
    lhs_base = np.einsum("ki,ij,kj->k", us, g, vs)
    lhs_tilde = np.einsum("ki,ij,kj->k", us, gt, vs)
    if relation == "forward":
        factor = 1.0 + float(g @ y @ Vx)
        res = lhs_tilde - lhs_base / factor
    elif relation == "inverse":
        factor = 1.0 - float(Lt @ Vx)
        res = lhs_base - lhs_tilde / factor
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return float(np.max(np.abs(res))) if res.size else 0.0
