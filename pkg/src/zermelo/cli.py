"""Command-line front end: ``zermelo verify|geodesic|levelset --config PATH``."""

import argparse
import csv
import io
import os
import sys
import tempfile

import numpy as np

from . import dynamics, isoparametric, navigation
from .errors import ConfigError, DomainExit, EmptyLevelSet, ZermeloError
from .scenario import load_scenario, run_checks

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_dir(args, sc):
    return args.out or sc.output.get("dir") or "."


def cmd_verify(args):
    sc = load_scenario(args.config, args.seed)
    if not sc.checks:
        raise ConfigError("scenario lists no checks")
    report = run_checks(sc)
    out = _out_dir(args, sc)
    lines = [report.summary_line()] + ["  " + p.summary_line() for p in report.parts]
    _write_atomic(os.path.join(out, sc.output.get("report", "report.json")), report.to_json() + "\n")
    _write_atomic(os.path.join(out, sc.output.get("summary", "summary.txt")), "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_geodesic(args):
    sc = load_scenario(args.config, args.seed)
    spec = sc.geodesic
    try:
        x0 = np.asarray(spec["x0"], dtype=float)
        y0 = np.asarray(spec["y0"], dtype=float)
        T = float(spec["T"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"geodesic needs x0, y0 and T: {exc!r}") from exc
    which = spec.get("metric", "tilde")
    m = sc.tilde if which == "tilde" else sc.base
    step = float(spec.get("step", sc.cfg.ode_step))
    try:
        rec = dynamics.integrate_geodesic(m, x0, y0, T, sc.cfg, step=step)
    except DomainExit as exc:
        print(f"geodesic left the domain at t = {exc.exit_time:.6g}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    extra = {}
    if which == "tilde" and spec.get("correspondence", False):
        extra = _correspondence_columns(sc, rec, x0, y0, T, step)
    out = _out_dir(args, sc)
    _write_atomic(os.path.join(out, sc.output.get("csv", "geodesic.csv")), rec.to_csv(extra))
    print(f"wrote {rec.t.size} samples; speed drift {rec.speed_drift:.3e}")
    if extra:
        print(f"max deviation from the navigated geodesic {np.max(extra['nav_err']):.3e}")
    return EXIT_OK


def _correspondence_columns(sc, rec, x0, y0, T, step):
    d = sc.datum
    if d.dilation_c is None:
        raise ConfigError("the correspondence columns need 'dilation_c'")
    y = navigation.inverse_map(d, x0, y0 / sc.tilde.F(x0, y0), sc.cfg)
    span = dynamics.alpha_c(d.dilation_c, T)
    base = dynamics.integrate_geodesic(d.base_metric, x0, y, span, sc.cfg, step=step)
    nav = dynamics.navigated_geodesic(d, base, T, sc.cfg, tilde=sc.tilde, samples=rec.t)
    cols = {f"nav_x{i + 1}": nav.x[:, i] for i in range(sc.dim)}
    cols["nav_err"] = np.max(np.abs(nav.x - rec.x), axis=1)
    return cols


def cmd_levelset(args):
    sc = load_scenario(args.config, args.seed)
    spec = sc.levelset
    levels = [float(v) for v in spec.get("levels", sc.levels)]
    count = int(spec.get("count", sc.samples))
    which = spec.get("which", ["base", "tilde"])
    ctx = sc.context()
    fields = {"base": sc.field, "tilde": isoparametric.tilde_field(ctx, sc.cfg)}
    rng = sc.rng(10)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["function", "level"] + [f"x{i + 1}" for i in range(sc.dim)])
    for name in which:
        if name not in fields:
            raise ConfigError(f"unknown level-set function {name!r}")
        for level in levels:
            try:
                s = isoparametric.sample_level_set(fields[name], level, sc.x0, count, sc.radius,
                                                   rng, sc.region)
            except EmptyLevelSet as exc:
                print(f"level {level} of {name}: {exc}", file=sys.stderr)
                return EXIT_FAIL
            for p in s.points:
                writer.writerow([name, f"{level:.17g}"] + [f"{v:.17g}" for v in p])
    out = _out_dir(args, sc)
    _write_atomic(os.path.join(out, sc.output.get("csv", "levelset.csv")), buf.getvalue())
    print(f"wrote {len(which) * len(levels) * count} points")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="zermelo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("verify", cmd_verify, "run the configured identity checks"),
        ("geodesic", cmd_geodesic, "integrate a geodesic and write a CSV trajectory"),
        ("levelset", cmd_levelset, "sample level sets of f and f~"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZermeloError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
