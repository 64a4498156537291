"""Metric abstraction and the tensors derived from a metric evaluator."""

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diffengine import DEFAULT_CONFIG, HyperDual, hessian
from .errors import DegenerateTensor, DomainViolation, NonFiniteEvaluation

__all__ = [
    "Kind",
    "MetricDescriptor",
    "TensorValue",
    "fundamental_tensor",
    "inner",
    "signature",
    "homogeneity_residual",
    "legendre_map",
    "metric_jets",
    "require_admissible",
]


class Kind(enum.Enum):
    FINSLER = "finsler"
    LORENTZ = "lorentz"


@dataclass(frozen=True, eq=False)
class MetricDescriptor:
    """A Finsler or Lorentz-Finsler metric on a chart of R^n.

    ``eval(x, y)`` must broadcast over leading axes and accept
    :class:`~zermelo.diffengine.HyperDual` arguments.  ``admissible(x, y, margin)``
    decides membership of ``y`` in the admissible cone at ``x`` (with a relative
    safety margin); ``region(x)`` says whether the base point is in the chart.
    """

    dim: int
    kind: Kind
    eval: Callable
    admissible: Callable
    name: str
    region: Callable = field(default=lambda x: True)
    x_independent: bool = False
    bh_density: Optional[Callable] = None
    datum: Optional[object] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("metrics need dimension >= 2")

    def __call__(self, x, y):
        return self.eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def F(self, x, y):
        return float(self.eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))

    def is_admissible(self, x, y, margin=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return bool(self.region(x)) and bool(self.admissible(x, y, margin))


@dataclass(frozen=True)
class TensorValue:
    matrix: np.ndarray
    base_x: np.ndarray
    base_y: np.ndarray

    def __call__(self, u, v):
        return float(np.asarray(u) @ self.matrix @ np.asarray(v))

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))


def require_admissible(m, x, y, cfg=DEFAULT_CONFIG):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (m.dim,) or y.shape != (m.dim,):
        raise ValueError(f"expected vectors of length {m.dim}")
    if not m.region(x):
        raise DomainViolation(f"base point {x} is outside the domain of {m.name}")
    if not m.admissible(x, y, cfg.cone_margin):
        raise DomainViolation(f"vector {y} is not admissible at {x} for {m.name}")
    return x, y


def _half_square(m, x):
    def half_sq(y):
        f = m.eval(x, y)
        return 0.5 * (f * f)

    return half_sq


def legendre_map(m, x, y):
    """Half-square value, Legendre image and fundamental tensor at (x, y)."""
    value, grad, hess = hessian(_half_square(m, x), y)
    return value, grad, hess


def _check_degenerate(g):
    scale = np.max(np.abs(g)) ** g.shape[0]
    if not abs(np.linalg.det(g)) >= 1e-12 * scale:
        raise DegenerateTensor("fundamental tensor is degenerate")


def fundamental_tensor(m, x, y, cfg=DEFAULT_CONFIG):
    """Hessian of F^2/2 in the fibre variable at (x, y)."""
    x, y = require_admissible(m, x, y, cfg)
    _, _, g = legendre_map(m, x, y)
    _check_degenerate(g)
    return TensorValue(g, x, y)


def inner(m, x, y, u, v, cfg=DEFAULT_CONFIG):
    return fundamental_tensor(m, x, y, cfg)(u, v)


def signature(m, x, y, cfg=DEFAULT_CONFIG):
    """Counts (positive, negative) of eigenvalues of the fundamental tensor."""
    g = fundamental_tensor(m, x, y, cfg).matrix
    eig = np.linalg.eigvalsh(g)
    thresh = 1e-10 * np.linalg.norm(g)
    if np.any(np.abs(eig) <= thresh):
        raise DegenerateTensor(f"zero eigenvalue in {eig}")
    return int(np.sum(eig > 0)), int(np.sum(eig < 0))


def homogeneity_residual(m, x, y, lambdas=(0.5, 2.0, 10.0)):
    """max over lambda of |F(x, lam y) - lam F(x, y)| / (lam F(x, y))."""
    f0 = m.F(x, y)
    y = np.asarray(y, dtype=float)
    return max(abs(m.F(x, lam * y) - lam * f0) / (lam * f0) for lam in lambdas)


def metric_jets(m, x, y):
    """Derivatives of F^2 needed by the geodesic spray.

    Returns ``(F2, dF2_dx, H_yy, H_xy)`` where ``H_yy[i, j]`` is
    ``d^2 F^2 / dy^i dy^j`` and ``H_xy[k, l]`` is ``d^2 F^2 / dx^k dy^l``.
    One batched hyper-dual evaluation over the joint (x, y) space.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    eye = np.eye(n)
    zero = np.zeros(n)
    iu, ju = np.triu_indices(n)
    kk, ll = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    kk, ll = kk.ravel(), ll.ravel()
    # directions in (x, y) space: first block y-y pairs, then x-y pairs
    ux = np.concatenate([np.broadcast_to(zero, (iu.size, n)), eye[kk]])
    uy = np.concatenate([eye[iu], np.broadcast_to(zero, (kk.size, n))])
    vx = np.zeros_like(ux)
    vy = np.concatenate([eye[ju], eye[ll]])
    xs = HyperDual(x, ux, vx, 0.0)
    ys = HyperDual(y, uy, vy, 0.0)
    f = m.eval(xs, ys)
    f2 = f * f
    mtot = iu.size + kk.size
    b = np.broadcast_to(f2.b, (mtot,))
    d = np.broadcast_to(f2.d, (mtot,))
    value = float(np.broadcast_to(f2.a, (mtot,))[0])
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(d)) and np.isfinite(value)):
        raise NonFiniteEvaluation(f"non-finite metric jet at ({x}, {y})")
    h_yy = np.empty((n, n))
    h_yy[iu, ju] = d[: iu.size]
    h_yy[ju, iu] = d[: iu.size]
    h_xy = d[iu.size:].reshape(n, n)
    dx = b[iu.size:].reshape(n, n)[:, 0]
    return value, dx, h_yy, h_xy
