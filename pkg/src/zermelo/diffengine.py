"""Second-order forward-mode differentiation with a finite-difference cross-check.

The workhorse is :class:`HyperDual`, a number ``a + b e1 + c e2 + d e1 e2``
with ``e1**2 = e2**2 = 0``.  Evaluating a smooth map at
``base + e1 u + e2 v`` yields the value in ``a``, the directional derivatives
along ``u`` and ``v`` in ``b`` and ``c`` and the mixed second derivative in
``d``, exact to roundoff.

Components are numpy arrays and broadcast against each other, so one
evaluation can carry a whole batch of direction pairs.  The convention used
throughout the package is that the *last* axis of a vector argument is the
coordinate axis; metric evaluators therefore write ``dot(x, y)`` rather than
``x @ y`` and index with ``x[..., i]``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, NonFiniteEvaluation

__all__ = [
    "HyperDual",
    "Jet2",
    "NumericsConfig",
    "dot",
    "stack",
    "real_part",
    "jet2",
    "grad_x",
    "hessian",
]


@dataclass(frozen=True)
class NumericsConfig:
    """Numerical knobs used across the package."""

    fd_step: float = 1e-5
    newton_tol: float = 1e-12
    newton_max_iter: int = 60
    ode_step: float = 1e-3
    quad_samples: int = 1 << 16
    cone_margin: float = 1e-3

    def __post_init__(self):
        for name in ("fd_step", "newton_tol", "ode_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.quad_samples < 1000:
            raise ValueError("quad_samples must be >= 1000")
        if not 0 < self.cone_margin < 0.5:
            raise ValueError("cone_margin must lie in (0, 0.5)")

    def replace(self, **changes):
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return NumericsConfig(**values)


DEFAULT_CONFIG = NumericsConfig()


def _lift(x):
    if isinstance(x, HyperDual):
        return x
    return HyperDual(x, 0.0, 0.0, 0.0)


class HyperDual:
    """Hyper-dual number with array-valued components."""

    __slots__ = ("a", "b", "c", "d")
    __array_priority__ = 100

    def __init__(self, a, b=0.0, c=0.0, d=0.0):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.d = np.asarray(d, dtype=float)

    def __repr__(self):
        return f"HyperDual({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"

    @property
    def shape(self):
        return np.broadcast_shapes(self.a.shape, self.b.shape, self.c.shape, self.d.shape)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        o = _lift(other)
        return HyperDual(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    __radd__ = __add__

    def __sub__(self, other):
        o = _lift(other)
        return HyperDual(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)

    def __rsub__(self, other):
        return _lift(other) - self

    def __neg__(self):
        return HyperDual(-self.a, -self.b, -self.c, -self.d)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, HyperDual):
            k = np.asarray(other, dtype=float)
            return HyperDual(self.a * k, self.b * k, self.c * k, self.d * k)
        o = other
        return HyperDual(
            self.a * o.a,
            self.a * o.b + self.b * o.a,
            self.a * o.c + self.c * o.a,
            self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        )

    __rmul__ = __mul__

    def _chain(self, g0, g1, g2):
        # g(a + h) with g0, g1, g2 the value, first and second derivatives at a
        return HyperDual(g0, g1 * self.b, g1 * self.c, g1 * self.d + g2 * self.b * self.c)

    def reciprocal(self):
        r = 1.0 / self.a
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, other):
        if not isinstance(other, HyperDual):
            k = 1.0 / np.asarray(other, dtype=float)
            return self * k
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, HyperDual):
            return exp(p * log(self))
        p = float(p)
        if p == 2.0:
            return self * self
        a = self.a
        return self._chain(a ** p, p * a ** (p - 1.0), p * (p - 1.0) * a ** (p - 2.0))

    def __getitem__(self, idx):
        def pick(arr):
            return arr[idx] if arr.ndim else arr

        return HyperDual(pick(self.a), pick(self.b), pick(self.c), pick(self.d))

    def sum(self, axis=None):
        return HyperDual(
            _bsum(self.a, self.shape, axis),
            _bsum(self.b, self.shape, axis),
            _bsum(self.c, self.shape, axis),
            _bsum(self.d, self.shape, axis),
        )

    # numpy interop --------------------------------------------------------
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs:
            return NotImplemented
        if ufunc in _BINARY and len(inputs) == 2:
            return _BINARY[ufunc](*inputs)
        if ufunc in _UNARY and len(inputs) == 1:
            return _UNARY[ufunc](inputs[0])
        return NotImplemented


def _bsum(arr, full_shape, axis):
    # Components may be stored un-broadcast; sum each over its own axes so a
    # value part without the batch axis keeps that shape.
    if axis is None:
        return np.broadcast_to(arr, full_shape).sum()
    nd = len(full_shape)
    ax = axis % nd
    k = ax - (nd - arr.ndim)
    if k < 0:
        return arr * full_shape[ax]
    if arr.shape[k] == 1 and full_shape[ax] != 1:
        return np.squeeze(arr, axis=k) * full_shape[ax]
    return arr.sum(axis=k)


def sqrt(x):
    if not isinstance(x, HyperDual):
        return np.sqrt(x)
    s = np.sqrt(x.a)
    return x._chain(s, 0.5 / s, -0.25 / (s * x.a))


def exp(x):
    if not isinstance(x, HyperDual):
        return np.exp(x)
    e = np.exp(x.a)
    return x._chain(e, e, e)


def log(x):
    if not isinstance(x, HyperDual):
        return np.log(x)
    r = 1.0 / x.a
    return x._chain(np.log(x.a), r, -r * r)


def _sin(x):
    return x._chain(np.sin(x.a), np.cos(x.a), -np.sin(x.a))


def _cos(x):
    return x._chain(np.cos(x.a), -np.sin(x.a), -np.cos(x.a))


def _abs(x):
    s = np.sign(x.a)
    return x._chain(np.abs(x.a), s, 0.0 * s)


_UNARY = {
    np.sqrt: sqrt,
    np.exp: exp,
    np.log: log,
    np.sin: _sin,
    np.cos: _cos,
    np.absolute: _abs,
    np.negative: lambda x: -x,
    np.square: lambda x: x * x,
}

_BINARY = {
    np.add: lambda p, q: _lift(p) + q,
    np.subtract: lambda p, q: _lift(p) - q,
    np.multiply: lambda p, q: _lift(p) * q,
    np.true_divide: lambda p, q: _lift(p) / q,
    np.power: lambda p, q: _lift(p) ** q,
}


def dot(p, q):
    """Inner product along the last axis; works for arrays and HyperDuals."""
    prod = p * q
    if isinstance(prod, HyperDual):
        return prod.sum(axis=-1)
    return np.sum(prod, axis=-1)


def stack(items, axis=-1):
    """``np.stack`` that accepts a mix of arrays and HyperDuals."""
    if not any(isinstance(it, HyperDual) for it in items):
        return np.stack([np.asarray(it, dtype=float) for it in items], axis=axis)
    lifted = [_lift(it) for it in items]
    shape = np.broadcast_shapes(*(h.shape for h in lifted))
    parts = []
    for name in "abcd":
        parts.append(np.stack([np.broadcast_to(getattr(h, name), shape) for h in lifted], axis=axis))
    return HyperDual(*parts)


def real_part(x):
    return x.a if isinstance(x, HyperDual) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Jet2:
    """Value plus first and second directional derivatives at a point.

    ``d1``/``d2`` are the derivatives along ``u``/``v``; ``d11``, ``d12``,
    ``d22`` the second derivatives.  Fields are arrays when a batch of
    directions was supplied.
    """

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray

    @property
    def d21(self):
        return self.d12


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEvaluation("map returned a non-finite value")


def jet2(fn, base, u, v, cfg=DEFAULT_CONFIG, mode="dual"):
    """Jet of ``fn`` at ``base`` along directions ``u`` and ``v``.

    Parameters
    ----------
    fn : callable
        Scalar map of a vector argument (last axis = coordinates).  On the
        ``"dual"`` path it must accept :class:`HyperDual` input.
    base : array_like, shape (N,)
    u, v : array_like, shape (N,) or (M, N)
        Directions; a leading batch axis gives M jets from one evaluation.
    mode : {"dual", "fd"}
        Forward mode (default) or second-order central differences with step
        ``cfg.fd_step * (1 + |base|)``.
    """
    base = np.asarray(base, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u, v = np.broadcast_arrays(u, v)
    if mode == "dual":
        return _jet2_dual(fn, base, u, v)
    if mode == "fd":
        return _jet2_fd(fn, base, u, v, cfg)
    raise ValueError(f"unknown mode {mode!r}")


def _jet2_dual(fn, base, u, v):
    dirs1 = np.stack([u, u, v])
    dirs2 = np.stack([v, u, v])
    out = fn(HyperDual(base, dirs1, dirs2, np.zeros_like(dirs1)))
    out = _lift(out)
    shape = dirs1.shape[:-1]
    b = np.broadcast_to(out.b, shape)
    c = np.broadcast_to(out.c, shape)
    d = np.broadcast_to(out.d, shape)
    value = np.broadcast_to(out.a, shape[1:]).copy()
    _check_finite(value, b, c, d)
    return Jet2(value, b[0].copy(), c[0].copy(), d[1].copy(), d[0].copy(), d[2].copy())


def _jet2_fd(fn, base, u, v, cfg):
    h = cfg.fd_step * (1.0 + np.linalg.norm(base))

    def f(p):
        val = np.asarray(fn(p), dtype=float)
        _check_finite(val)
        return val

    f0 = np.broadcast_to(f(base), u.shape[:-1])
    fu_p, fu_m = f(base + h * u), f(base - h * u)
    fv_p, fv_m = f(base + h * v), f(base - h * v)
    fpp = f(base + h * (u + v))
    fpm = f(base + h * (u - v))
    fmp = f(base - h * (u - v))
    fmm = f(base - h * (u + v))
    d1 = (fu_p - fu_m) / (2 * h)
    d2 = (fv_p - fv_m) / (2 * h)
    d11 = (fu_p - 2 * f0 + fu_m) / (h * h)
    d22 = (fv_p - 2 * f0 + fv_m) / (h * h)
    d12 = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return Jet2(np.array(f0), d1, d2, d11, d12, d22)


def grad_x(fn, x, y, cfg=DEFAULT_CONFIG, admissible=None, mode="dual"):
    """Gradient of ``fn(x, y)`` with respect to ``x`` at fixed ``y``.

    ``admissible(x, y) -> bool`` guards every probe point; a failing probe
    raises :class:`DomainViolation`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n)
    if admissible is not None and not admissible(x, y):
        raise DomainViolation(f"point ({x}, {y}) is not admissible")
    if mode == "dual":
        out = _lift(fn(HyperDual(x, eye, 0.0, 0.0), y))
        g = np.broadcast_to(out.b, (n,)).copy()
        _check_finite(g)
        return g
    if mode != "fd":
        raise ValueError(f"unknown mode {mode!r}")
    h = cfg.fd_step * (1.0 + np.linalg.norm(x))
    g = np.empty(n)
    for k in range(n):
        xp, xm = x + h * eye[k], x - h * eye[k]
        if admissible is not None and not (admissible(xp, y) and admissible(xm, y)):
            raise DomainViolation(f"finite-difference probe left the domain near {x}")
        g[k] = (float(fn(xp, y)) - float(fn(xm, y))) / (2 * h)
    _check_finite(g)
    return g


def hessian(fn, base):
    """Value, gradient and Hessian of a scalar map from one batched evaluation."""
    base = np.asarray(base, dtype=float)
    n = base.shape[-1]
    iu, ju = np.triu_indices(n)
    eye = np.eye(n)
    out = _lift(fn(HyperDual(base, eye[iu], eye[ju], 0.0)))
    m = iu.size
    b = np.broadcast_to(out.b, (m,))
    d = np.broadcast_to(out.d, (m,))
    value = float(np.broadcast_to(out.a, (m,))[0])
    _check_finite(value, b, d)
    grad = np.empty(n)
    diag = iu == ju
    grad[iu[diag]] = b[diag]
    hess = np.empty((n, n))
    hess[iu, ju] = d
    hess[ju, iu] = d
    return value, grad, hess
