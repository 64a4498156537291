"""Verification reports and their JSON form."""

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

__all__ = ["VerificationReport", "composite", "load_schema"]


@dataclass
class VerificationReport:
    """Residual statistics for one identity.

    ``worst_sample`` is a JSON-friendly description of the sample with the
    largest residual; ``parts`` holds sub-reports for composite checks.
    """

    identity: str
    n_samples: int
    max_residual: float
    mean_residual: float
    tolerance: float
    passed: bool
    worst_sample: Optional[dict] = None
    parts: list = field(default_factory=list)

    @classmethod
    def from_residuals(cls, identity, residuals, tolerance, samples=None, n_samples=None):
        res = np.asarray(residuals, dtype=float)
        if res.size == 0:
            return cls(identity, 0, 0.0, 0.0, tolerance, False)
        k = int(np.argmax(np.where(np.isfinite(res), res, np.inf)))
        worst = None
        if samples is not None:
            worst = {"index": k, "sample": _jsonable(samples[k]), "residual": float(res[k])}
        max_res = float(res[k])
        return cls(
            identity=identity,
            n_samples=int(res.size if n_samples is None else n_samples),
            max_residual=max_res,
            mean_residual=float(np.mean(res)),
            tolerance=float(tolerance),
            passed=bool(np.all(np.isfinite(res)) and max_res <= tolerance),
            worst_sample=worst,
        )

    def to_dict(self):
        out = {
            "identity": self.identity,
            "n_samples": self.n_samples,
            "max_residual": _finite_or_none(self.max_residual),
            "mean_residual": _finite_or_none(self.mean_residual),
            "tolerance": self.tolerance,
            "pass": self.passed,
        }
        if self.worst_sample is not None:
            out["worst_sample"] = self.worst_sample
        if self.parts:
            out["parts"] = [p.to_dict() for p in self.parts]
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_line(self):
        status = "PASS" if self.passed else "FAIL"
        line = (f"{status} {self.identity}: max {self.max_residual:.3e} "
                f"mean {self.mean_residual:.3e} tol {self.tolerance:.1e} (n={self.n_samples})")
        if not self.passed and self.worst_sample is not None:
            line += f" worst={self.worst_sample}"
        return line


def composite(identity, parts):
    """Report that passes when every part passes; residuals are taken relative to tolerance."""
    if not parts:
        return VerificationReport(identity, 0, 0.0, 0.0, 1.0, False)
    ratios = [p.max_residual / p.tolerance if p.tolerance > 0 else np.inf for p in parts]
    worst = int(np.argmax(ratios))
    return VerificationReport(
        identity=identity,
        n_samples=sum(p.n_samples for p in parts),
        max_residual=float(ratios[worst]),
        mean_residual=float(np.mean(ratios)),
        tolerance=1.0,
        passed=all(p.passed for p in parts),
        worst_sample={"part": parts[worst].identity},
        parts=list(parts),
    )


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(o) for o in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def load_schema():
    text = resources.files("zermelo").joinpath("data/report.schema.json").read_text()
    return json.loads(text)
