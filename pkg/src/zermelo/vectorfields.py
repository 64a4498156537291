"""Wind vector fields V(x) on R^n."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diffengine import HyperDual

__all__ = ["VectorFieldSpec", "constant", "linear", "radial_negative", "custom"]


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """A smooth vector field.

    ``kind`` is one of ``"constant"``, ``"linear"``, ``"radial-negative"`` or
    ``"custom"``.  Custom fields supply ``fn(x)`` written with broadcasting,
    HyperDual-friendly operations, and optionally their Jacobian.
    """

    kind: str
    dim: int
    vector: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    fn: Optional[Callable] = None
    jac: Optional[Callable] = None
    label: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        if self.kind == "radial-negative":
            return -x
        if self.kind == "constant":
            if isinstance(x, HyperDual):
                return self.vector
            return np.broadcast_to(self.vector, np.shape(x)).copy()
        if self.kind == "linear":
            return (x[..., None, :] * self.matrix).sum(axis=-1)
        return self.fn(x)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "radial-negative":
            return -np.eye(self.dim)
        if self.kind == "constant":
            return np.zeros((self.dim, self.dim))
        if self.kind == "linear":
            return np.array(self.matrix, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        eye = np.eye(self.dim)
        out = self.fn(HyperDual(x, eye, 0.0, 0.0))
        return np.broadcast_to(out.b, (self.dim, self.dim)).T.copy()

    @property
    def generator_matrix(self):
        """Matrix A with V(x) = A x, or None if the field is not linear."""
        if self.kind == "radial-negative":
            return -np.eye(self.dim)
        if self.kind == "linear":
            return np.array(self.matrix, dtype=float)
        return None


def constant(v):
    v = np.asarray(v, dtype=float)
    return VectorFieldSpec("constant", v.size, vector=v, label=f"constant{tuple(v)}")


def linear(A):
    A = np.asarray(A, dtype=float)
    return VectorFieldSpec("linear", A.shape[0], matrix=A, label="linear")


def radial_negative(n):
    return VectorFieldSpec("radial-negative", n, label="-x")


def custom(fn, dim, jac=None, label="custom"):
    return VectorFieldSpec("custom", dim, fn=fn, jac=jac, label=label)
