"""Concrete metrics: Euclidean, quartic Minkowski, Randers, Lorentz Funk, navigated."""

import numpy as np

from .diffengine import dot, real_part, sqrt
from .errors import NavigationRegimeViolation
from .finsler import Kind, MetricDescriptor
from .navigation import NavigationDatum, induced_metric
from .vectorfields import VectorFieldSpec, radial_negative

__all__ = [
    "euclidean",
    "minkowski_quartic",
    "conformal_quartic",
    "randers_navigation",
    "lorentz_funk",
    "navigation_induced",
    "funk_datum",
    "METRIC_NAMES",
    "build_metric",
]

FUNK_MARGIN = 1e-3


def _nonzero(x, y, margin=0.0):
    return bool(np.any(np.asarray(y) != 0.0))


def euclidean(n):
    return MetricDescriptor(
        dim=n,
        kind=Kind.FINSLER,
        eval=lambda x, y: sqrt(dot(y, y)),
        admissible=_nonzero,
        name="euclidean",
        x_independent=True,
        bh_density=lambda x: 1.0,
    )


def _quartic(y):
    y2 = y * y
    return dot(y2, y2) ** 0.25


def minkowski_quartic(n):
    """F(y) = (sum y_i^4)^(1/4), a non-Riemannian Minkowski norm."""
    return MetricDescriptor(
        dim=n,
        kind=Kind.FINSLER,
        eval=lambda x, y: _quartic(y),
        admissible=_nonzero,
        name="minkowski-quartic",
        x_independent=True,
    )


def conformal_quartic(n, k=1.0):
    """F(x, y) = |x|^k (sum y_i^4)^(1/4) on R^n minus the origin.

    ``V(x) = -x`` is homothetic for it with dilation ``(k + 1) / 2``, and its
    S-curvature is not identically zero, which makes it a useful probe for
    homothety invariance.
    """
    from .calculus import bh_density

    sigma0 = bh_density(minkowski_quartic(n), np.zeros(n))

    def evaluate(x, y):
        return dot(x, x) ** (0.5 * k) * _quartic(y)

    return MetricDescriptor(
        dim=n,
        kind=Kind.FINSLER,
        eval=evaluate,
        admissible=_nonzero,
        region=lambda x: float(np.linalg.norm(x)) > 1e-6,
        name="conformal-quartic",
        bh_density=lambda x: sigma0 * float(np.linalg.norm(x)) ** (n * k),
        params={"k": k},
    )


def randers_navigation(n, V: VectorFieldSpec):
    """Randers metric from weak-wind navigation of the Euclidean metric."""

    def evaluate(x, y):
        Vx = V(x)
        vv = dot(Vx, Vx)
        if np.any(real_part(vv) >= 1.0):
            raise NavigationRegimeViolation("|V(x)| >= 1: outside the Randers regime")
        yv = dot(y, Vx)
        lam = 1.0 - vv
        return (sqrt(lam * dot(y, y) + yv * yv) - yv) / lam

    def region(x):
        Vx = V(np.asarray(x, dtype=float))
        return float(Vx @ Vx) < 1.0

    return MetricDescriptor(
        dim=n,
        kind=Kind.FINSLER,
        eval=evaluate,
        admissible=_nonzero,
        region=region,
        name="randers",
        x_independent=V.kind == "constant",
        bh_density=lambda x: 1.0,
        datum=NavigationDatum(euclidean(n), V),
        params={"wind": V.label},
    )


def funk_datum(n):
    """Euclidean metric with the homothetic wind V(x) = -x (dilation 1/2)."""
    return NavigationDatum(euclidean(n), radial_negative(n), dilation_c=0.5)


def lorentz_funk(n):
    """Closed-form Lorentz Funk metric on {|x| > 1}.

    F~(x, y) = (sqrt(<x,y>^2 - (|x|^2 - 1)|y|^2) - <x,y>) / (|x|^2 - 1),
    defined on the cone <x,y> < 0, <x,y>^2 > (|x|^2 - 1)|y|^2.
    """

    def evaluate(x, y):
        xy = dot(x, y)
        q = dot(x, x) - 1.0
        with np.errstate(invalid="ignore"):
            return (sqrt(xy * xy - q * dot(y, y)) - xy) / q

    def admissible(x, y, margin=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xy = float(x @ y)
        yy = float(y @ y)
        if xy >= 0.0 or yy == 0.0:
            return False
        # distance from -x to the ray through y is below 1 - margin
        return float(x @ x) * yy - xy * xy < (1.0 - margin) ** 2 * yy

    return MetricDescriptor(
        dim=n,
        kind=Kind.LORENTZ,
        eval=evaluate,
        admissible=admissible,
        region=lambda x: float(np.linalg.norm(x)) > 1.0 + FUNK_MARGIN,
        name="lorentz-funk",
        datum=funk_datum(n),
    )


def navigation_induced(F: MetricDescriptor, V: VectorFieldSpec, dilation_c=None, probe_points=()):
    """Lorentz-Finsler metric from strong-wind navigation of ``F`` by ``V``."""
    d = NavigationDatum(F, V, dilation_c)
    return induced_metric(d, "strong", name="navigation", probe_points=probe_points)


METRIC_NAMES = ("euclidean", "minkowski-quartic", "randers", "lorentz-funk", "navigation")


def build_metric(name, dim, wind=None, base=None, **params):
    """Registry lookup used by the scenario loader."""
    if name == "euclidean":
        return euclidean(dim)
    if name == "minkowski-quartic":
        return minkowski_quartic(dim)
    if name == "conformal-quartic":
        return conformal_quartic(dim, params.get("k", 1.0))
    if name == "lorentz-funk":
        return lorentz_funk(dim)
    if name == "randers":
        if wind is None:
            raise ValueError("randers needs a wind field")
        return randers_navigation(dim, wind)
    if name == "navigation":
        if wind is None or base is None:
            raise ValueError("navigation needs a base metric and a wind field")
        return navigation_induced(base, wind, params.get("dilation_c"))
    raise KeyError(f"unknown metric {name!r}")
