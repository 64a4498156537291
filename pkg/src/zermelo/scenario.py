"""Scenario configuration: loading, validation and the registry of named checks."""

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import calculus, dynamics, isoparametric, navigation, zoo
from .diffengine import DEFAULT_CONFIG, NumericsConfig
from .errors import ConfigError, ZermeloError
from .finsler import signature
from .report import VerificationReport, composite
from .vectorfields import constant, linear, radial_negative

__all__ = ["SCHEMA", "Scenario", "load_scenario", "parse_scenario", "CHECKS", "run_checks"]

SCHEMA = "zermelo-scenario/1"

_TOP_KEYS = {
    "schema", "name", "dim", "metric", "wind", "dilation_c", "tilde", "field", "x0", "region",
    "numerics", "seed", "checks", "samples", "levels", "closed_form", "geodesic", "levelset",
    "output", "t_max",
}


@dataclass(eq=False)
class Scenario:
    name: str
    dim: int
    base: object
    wind: object
    datum: navigation.NavigationDatum
    tilde: object
    field: Optional[calculus.ScalarField]
    field_spec: dict
    x0: Optional[np.ndarray]
    radius: float
    region: Callable
    cfg: NumericsConfig
    seed: int
    checks: list
    samples: int
    levels: list
    closed_form: Optional[Callable]
    geodesic: dict = field(default_factory=dict)
    levelset: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    t_max: float = 0.3
    _ctx: object = None

    def context(self):
        if self._ctx is None:
            if self.field is None or self.x0 is None:
                raise ConfigError("this check needs 'field' and 'x0'")
            self._ctx = isoparametric.make_context(
                self.datum, self.field, self.x0, self.cfg, tilde=self.tilde,
                radius=self.radius, region=self.region, c=self.datum.dilation_c)
        return self._ctx

    def rng(self, salt=0):
        return np.random.default_rng([self.seed, salt])


def _vec(value, dim, what):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (dim,):
        raise ConfigError(f"{what} must be a list of {dim} numbers")
    return arr


def _wind(spec, dim):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("'wind' must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "radial-negative":
        return radial_negative(dim)
    if kind == "constant":
        return constant(_vec(spec.get("vector"), dim, "wind.vector"))
    if kind == "linear":
        A = np.asarray(spec.get("matrix"), dtype=float)
        if A.shape != (dim, dim):
            raise ConfigError(f"wind.matrix must be {dim}x{dim}")
        return linear(A)
    raise ConfigError(f"unknown wind kind {kind!r}")


def _base_metric(spec, dim, wind):
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("'metric' must be an object with a 'name'")
    name = spec["name"]
    if name not in ("euclidean", "minkowski-quartic", "randers", "conformal-quartic"):
        raise ConfigError(f"unknown or non-Finsler base metric {name!r}")
    params = {k: v for k, v in spec.items() if k != "name"}
    try:
        return zoo.build_metric(name, dim, wind=wind, **params)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _field(spec, dim, base, x0):
    name = spec.get("name")
    if name == "sphere":
        a = float(spec["a"])
        center = _vec(spec.get("center", [0.0] * dim), dim, "field.center")
        x0 = center + a * np.eye(dim)[0] if x0 is None else x0
        return isoparametric.sphere_field(a, dim, center=center), x0
    if name == "hyperplane":
        a = float(spec["a"])
        normal = _vec(spec.get("normal", np.eye(dim)[0]), dim, "field.normal")
        x0 = a * normal / float(normal @ normal) if x0 is None else x0
        return isoparametric.affine_field(base, normal, x0), x0
    raise ConfigError(f"unknown field {name!r}")


def _closed_form(field_spec, x0, ell):
    # for V = -x and c = 1/2: f~ = ln((k(x0) - 1) / (k(x) - 1)) with k = |x| or <ell, x>
    name = field_spec.get("name")
    if name == "sphere":
        a = float(field_spec["a"])
        return lambda p: math.log((a - 1.0) / (np.linalg.norm(p) - 1.0))
    if name == "hyperplane":
        a = float(ell @ x0)
        return lambda p: math.log((a - 1.0) / (float(ell @ p) - 1.0))
    raise ConfigError(f"no closed form for field {name!r}")


def _region(spec):
    spec = spec or {}
    radius = float(spec.get("radius", 0.4))
    preds = []
    if "annulus" in spec:
        lo, hi = (float(v) for v in spec["annulus"])
        preds.append(lambda p: lo < np.linalg.norm(p) < hi)
    if "box" in spec:
        box = np.asarray(spec["box"], dtype=float)
        preds.append(lambda p: bool(np.all(p >= box[:, 0]) and np.all(p <= box[:, 1])))
    return radius, (lambda p: all(pred(p) for pred in preds))


def parse_scenario(data, seed=None):
    """Build a :class:`Scenario` from a decoded JSON object."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    if data.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported or missing schema (expected {SCHEMA!r})")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    try:
        dim = int(data["dim"])
        if dim < 2:
            raise ConfigError("dim must be >= 2")
        wind = _wind(data["wind"], dim)
        base = _base_metric(data["metric"], dim, wind)
        cfg = DEFAULT_CONFIG.replace(**data.get("numerics", {}))
        radius, region = _region(data.get("region"))
        x0 = None if "x0" not in data else _vec(data["x0"], dim, "x0")
        rng_seed = int(data.get("seed", 0) if seed is None else seed)
        c_spec = data.get("dilation_c")
        if c_spec == "fit":
            c = _fit_c(base, wind, x0, cfg, rng_seed)
        else:
            c = None if c_spec is None else float(c_spec)
        datum = navigation.NavigationDatum(base, wind, c)
        tilde_name = data.get("tilde", {"name": "navigation"}).get("name")
        if tilde_name == "lorentz-funk":
            if wind.kind != "radial-negative" or base.name != "euclidean":
                raise ConfigError("lorentz-funk requires the Euclidean metric with wind -x")
            tilde = zoo.lorentz_funk(dim)
        elif tilde_name == "navigation":
            tilde = navigation.induced_metric(datum, "strong")
        else:
            raise ConfigError(f"unknown navigated metric {tilde_name!r}")
        f = None
        field_spec = data.get("field") or {}
        if field_spec:
            f, x0 = _field(field_spec, dim, base, x0)
        closed = None
        if data.get("closed_form", False):
            if f is None or wind.kind != "radial-negative" or c != 0.5:
                raise ConfigError("closed forms need a field, wind -x and dilation 1/2")
            closed = _closed_form(field_spec, x0, f.d(x0))
        checks = list(data.get("checks", []))
        for name in checks:
            if name not in CHECKS:
                raise ConfigError(f"unknown check {name!r}")
        return Scenario(
            name=str(data.get("name", "scenario")), dim=dim, base=base, wind=wind, datum=datum,
            tilde=tilde, field=f, field_spec=field_spec, x0=x0, radius=radius, region=region,
            cfg=cfg, seed=rng_seed, checks=checks, samples=int(data.get("samples", 20)),
            levels=[float(v) for v in data.get("levels", [-0.2, 0.0, 0.2])], closed_form=closed,
            geodesic=dict(data.get("geodesic", {})), levelset=dict(data.get("levelset", {})),
            output=dict(data.get("output", {})), t_max=float(data.get("t_max", 0.3)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, ZermeloError) as exc:
        raise ConfigError(f"invalid scenario: {exc!r}") from exc


def load_scenario(path, seed=None):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(data, seed)


def _fit_c(base, wind, x0, cfg, seed):
    if x0 is None:
        raise ConfigError("fitting the dilation needs 'x0'")
    rng = np.random.default_rng([seed, 99])
    fl = dynamics.flow(wind, cfg)
    samples = [(x0 + 0.2 * rng.standard_normal(x0.size), rng.standard_normal(x0.size)) for _ in range(8)]
    c, _ = dynamics.fit_dilation(base, fl, samples)
    return c


# checks -----------------------------------------------------------------------

def _ball(sc, count, rng):
    pts = []
    while len(pts) < count:
        u = rng.standard_normal(sc.dim)
        p = sc.x0 + u * sc.radius * rng.random() ** (1.0 / sc.dim) / np.linalg.norm(u)
        if sc.region(p) and navigation.wind_strength(sc.datum, p) > 1.0:
            pts.append(p)
    return pts


def _precone_pairs(sc, count, rng):
    F = sc.base
    out = []
    for p in _ball(sc, 10 * count, rng):
        y = rng.standard_normal(sc.dim)
        y /= F.F(p, y)
        if navigation.fibre_inner(F, p, y, sc.datum.V(p)) >= -1.0:
            continue
        # keep images that are interior to the cone by the configured margin
        yt = navigation.forward_map(sc.datum, p, y, sc.cfg)
        if navigation.cone_membership(sc.datum, p, yt, sc.cfg.cone_margin):
            out.append((p, y))
        if len(out) == count:
            break
    return out


def check_navigation_consistency(sc):
    rng = sc.rng(1)
    res, samples = [], []
    for p, y in _precone_pairs(sc, sc.samples, rng):
        yt = navigation.forward_map(sc.datum, p, y, sc.cfg)
        back = navigation.inverse_map(sc.datum, p, yt, sc.cfg)
        res.append(max(abs(sc.tilde.F(p, yt) - 1.0), np.linalg.norm(back - y)))
        samples.append({"x": p, "y": y})
    return VerificationReport.from_residuals("navigation-consistency", res, 1e-9, samples)


def check_signature(sc):
    rng = sc.rng(2)
    res, samples = [], []
    for p, y in _precone_pairs(sc, sc.samples, rng):
        yt = navigation.forward_map(sc.datum, p, y, sc.cfg)
        sig = signature(sc.tilde, p, yt, sc.cfg)
        res.append(0.0 if sig == (1, sc.dim - 1) else 1.0)
        samples.append({"x": p, "y": yt, "signature": list(sig)})
    return VerificationReport.from_residuals("signature", res, 0.5, samples)


def check_tensor_relation(sc):
    rng = sc.rng(3)
    res, samples = [], []
    for p, y in _precone_pairs(sc, sc.samples, rng):
        res.append(navigation.tensor_relation_residual(sc.datum, p, y, sc.cfg, tilde=sc.tilde, rng=rng))
        samples.append({"x": p, "y": y})
    return VerificationReport.from_residuals("tensor-relation", res, 1e-6, samples)


def check_homothety(sc):
    if sc.datum.dilation_c is None:
        raise ConfigError("the homothety check needs 'dilation_c'")
    rng = sc.rng(4)
    fl = dynamics.flow(sc.wind, sc.cfg, sc.datum.dilation_c)
    res, samples = [], []
    for p in _ball(sc, sc.samples, rng):
        y = rng.standard_normal(sc.dim)
        t = float(rng.uniform(-0.3, 0.3))
        res.append(dynamics.homothety_residual(sc.base, fl, p, y, t))
        samples.append({"x": p, "y": y, "t": t})
    return VerificationReport.from_residuals("homothety", res, 1e-7, samples)


def check_s_curvature_shift(sc):
    c = sc.datum.dilation_c
    if c is None:
        raise ConfigError("the S-curvature shift needs 'dilation_c'")
    rng = sc.rng(5)
    mu = calculus.bh_measure(sc.base, sc.cfg)
    n = sc.dim
    res, samples = [], []
    for p, y in _precone_pairs(sc, sc.samples, rng):
        yt = navigation.forward_map(sc.datum, p, y, sc.cfg)
        s_tilde = calculus.s_curvature(sc.tilde, mu, p, yt, sc.cfg)
        s_base = calculus.s_curvature(sc.base, mu, p, y, sc.cfg)
        res.append(abs(s_tilde - s_base - (n + 1) * c))
        samples.append({"x": p, "y": y})
    return VerificationReport.from_residuals("s-curvature-shift", res, 1e-3, samples)


def _level_pairs(sc, rng, count):
    ctx = sc.context()
    ts = rng.uniform(-sc.t_max, sc.t_max, count)
    out = []
    for t in ts:
        s = isoparametric.sample_level_set(sc.field, dynamics.alpha_c(ctx.c, t), sc.x0, 1,
                                           sc.radius, rng, sc.region)
        out.append((s.points[0], float(t)))
    return out


def check_gradient_correspondence(sc):
    ctx = sc.context()
    ftilde = isoparametric.tilde_field(ctx, sc.cfg)
    rng = sc.rng(6)
    res, samples = [], []
    for x, t in _level_pairs(sc, rng, sc.samples):
        res.append(isoparametric.verify_gradient_correspondence(ctx, x, t, sc.cfg, ftilde))
        samples.append({"x": x, "t": t})
    return VerificationReport.from_residuals("gradient-correspondence", res, 1e-5, samples)


def _laplacian_check(sc, variant, identity, salt):
    ctx = sc.context()
    ftilde = isoparametric.tilde_field(ctx, sc.cfg)
    rng = sc.rng(salt)
    res, samples = [], []
    for x, t in _level_pairs(sc, rng, sc.samples):
        lhs, rhs = isoparametric.laplacian_relation_terms(ctx, x, t, variant, sc.cfg, ftilde)
        res.append(abs(lhs - rhs))
        samples.append({"x": x, "t": t, "lhs": lhs, "rhs": rhs})
    return VerificationReport.from_residuals(identity, res, 1e-3, samples)


def check_laplacian_dmu(sc):
    return _laplacian_check(sc, "dmu", "laplacian-correspondence-dmu", 7)


def check_laplacian_osc(sc):
    return _laplacian_check(sc, "osculating", "laplacian-correspondence-osc", 8)


def check_theorem(sc):
    ctx = sc.context()
    return isoparametric.verify_theorem(ctx, sc.levels, sc.samples, sc.cfg, sc.rng(9),
                                        closed_form=sc.closed_form, closed_samples=10 * sc.samples)


CHECKS = {
    "navigation-consistency": check_navigation_consistency,
    "signature": check_signature,
    "tensor-relation": check_tensor_relation,
    "homothety": check_homothety,
    "s-curvature-shift": check_s_curvature_shift,
    "gradient-correspondence": check_gradient_correspondence,
    "laplacian-correspondence-dmu": check_laplacian_dmu,
    "laplacian-correspondence-osc": check_laplacian_osc,
    "level-set-correspondence": check_theorem,
}


def run_checks(sc):
    """Run every configured check; solver failures become failing reports."""
    parts = []
    for name in sc.checks:
        try:
            parts.append(CHECKS[name](sc))
        except ConfigError:
            raise
        except ZermeloError as exc:
            parts.append(VerificationReport(name, 0, float("inf"), float("inf"), 1.0, False,
                                            worst_sample={"error": f"{type(exc).__name__}: {exc}"}))
    return composite(sc.name, parts)
