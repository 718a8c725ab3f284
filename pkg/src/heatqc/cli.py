"""Command-line front end: ``heatqc {selfcheck,extend,scan,vanish,analyze}``.

Every run writes its artifacts plus ``manifest.json`` under ``--out``.
Exit status: 0 success, 1 invalid configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import re
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (ConfigError, DomainError, NonDoublingSuspected, NonQuasiconformalSample,
                     SingularityError, ToleranceNotMet)
from .quadrature import QuadratureConfig

log = logging.getLogger("heatqc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
EXTEND_COLUMNS = ["x", "t", "U", "V", "U_x", "U_t", "V_x", "V_t", "re_mu", "im_mu", "abs_mu", "K", "J", "err"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- grid parsing ---------------------------------------------------------------

def parse_grid(text: str, positive: bool = False) -> np.ndarray:
    """``a:b:n`` (uniform), ``a:b:log:n`` (geometric) or ``v1,v2,...``."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) == 3:
                a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
                out = np.linspace(a, b, n)
            elif len(parts) == 4 and parts[2] == "log":
                a, b, n = float(parts[0]), float(parts[1]), int(parts[3])
                if not (a > 0 and b > 0):
                    raise ConfigError(f"log grid needs positive ends: {text!r}")
                out = np.geomspace(a, b, n)
            else:
                raise ConfigError(f"bad grid {text!r}")
            if n < 1:
                raise ConfigError(f"grid needs at least one point: {text!r}")
        else:
            out = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None
    if out.size == 0 or not np.all(np.isfinite(out)):
        raise ConfigError(f"bad grid {text!r}")
    if positive and np.any(out <= 0):
        raise ConfigError(f"grid must be positive: {text!r}")
    return out


def parse_pair(text: str, kind=float):
    try:
        a, b = (kind(v) for v in str(text).replace(",", ":").split(":"))
    except ValueError:
        raise ConfigError(f"expected a pair like 1:2, got {text!r}") from None
    return a, b


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


# -- output helpers --------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, Path):
        return str(o)
    return o


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands --------------------------------------------------------------------

def _quad_cfg(ns) -> QuadratureConfig:
    return QuadratureConfig(rel_tol=float(ns.rel_tol), abs_tol=float(ns.abs_tol),
                            max_panels=int(ns.max_panels), annulus_budget=int(ns.annulus_budget))


def cmd_selfcheck(ns, out: Path):
    from .selfcheck import run_selfcheck

    checks = run_selfcheck(_quad_cfg(ns))
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    write_json(out / "selfcheck.json", [{"check": n, "passed": p, "detail": d} for n, p, d in checks])
    return (EXIT_OK if ok else EXIT_NUMERIC), ["selfcheck.json"]


def cmd_extend(ns, out: Path):
    from .extension import beltrami_arrays
    from .weights import resolve

    spec = resolve(ns.weight)
    xs, ts = parse_grid(ns.x), parse_grid(ns.t, positive=True)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    a = beltrami_arrays(spec, X.ravel(), T.ravel(), _quad_cfg(ns))
    rows = zip(*(a[c] for c in EXTEND_COLUMNS))
    write_csv(out / "extension.csv", EXTEND_COLUMNS, rows)
    print(f"{X.size} samples, sup|mu| = {a['abs_mu'].max():.6g}, sup K = {a['K'].max():.6g}, "
          f"min J = {a['J'].min():.6g}, flagged = {int(a['flagged'].sum())}")
    return EXIT_OK, ["extension.csv"]


def _inner(ns):
    nx, nsx = parse_pair(ns.inner, int)
    if nx < 8 or nsx < 8:
        raise ConfigError("inner grid sizes must be >= 8")
    return nx, nsx


def cmd_scan(ns, out: Path):
    from .carleson import carleson_scan
    from .weights import resolve

    spec = resolve(ns.weight)
    x0 = parse_grid(ns.x0)
    t = parse_grid(ns.t, positive=True)
    if x0.size < 4 or t.size < 4:
        raise ConfigError("scan grids need at least 4 points per axis")
    rep = carleson_scan(spec, ((x0[0], x0[-1]), (t[0], t[-1])), (x0.size, t.size), _quad_cfg(ns),
                        inner_grid=_inner(ns), max_rounds=int(ns.rounds))
    rep.to_csv(out / "boxes.csv")
    write_json(out / "report.json", rep.to_dict())
    for row in rep.refinement_history:
        print("grid %dx%d  sup A = %.6g  sup thm3 = %.6g  sup thm5 = %.6g" % row)
    failed = [b for b in rep.boxes if b.status.startswith("failed")]
    return (EXIT_NUMERIC if failed else EXIT_OK), ["boxes.csv", "report.json"]


def cmd_vanish(ns, out: Path):
    from .carleson import vanishing_profile, write_boxes_csv
    from .weights import resolve

    spec = resolve(ns.weight)
    prof, boxes = vanishing_profile(spec, parse_grid(ns.x0), parse_grid(ns.t, positive=True), _quad_cfg(ns),
                                    inner_grid=_inner(ns))
    write_csv(out / "vanish.csv", ["t", "sup_A"], prof)
    write_boxes_csv(boxes, out / "boxes.csv")
    for t, a in prof:
        print(f"t = {t:<10.4g} sup A = {a:.6g}")
    failed = [b for b in boxes if b.status.startswith("failed")]
    return (EXIT_NUMERIC if failed else EXIT_OK), ["vanish.csv", "boxes.csv"]


def cmd_analyze(ns, out: Path):
    from .analysis import ainfty_ratio, bmo_vmo_profile, jn_tail, log_weight
    from .weights import doubling_estimate, resolve

    spec = resolve(ns.weight)
    a, b = parse_pair(ns.window)
    if not a < b:
        raise ConfigError("window must satisfy a < b")
    scales = parse_grid(ns.scales, positive=True)
    alpha = log_weight(spec)
    cfg = _quad_cfg(ns)
    rep = bmo_vmo_profile(alpha, (a, b), scales, int(ns.samples), cfg, seed=int(ns.seed))
    rng = np.random.default_rng(int(ns.seed))
    ratios = []
    for _ in range(int(ns.samples)):
        lo, hi = np.sort(rng.uniform(a, b, 2))
        if hi - lo > 1e-9 * (b - a):
            ratios.append(ainfty_ratio(spec, (lo, hi), cfg))
    ratios.append(ainfty_ratio(spec, (a, b), cfg))
    rep.ainfty_ratio_sup = float(max(ratios))
    jn = jn_tail(alpha, (a, b), parse_grid(ns.lambdas, positive=True))
    rep.jn_tail_samples = jn.samples
    centers = np.linspace(a, b, 9)
    rep.doubling_estimate = doubling_estimate(spec, centers, np.geomspace(1e-3, 10.0, 13))
    doc = rep.to_dict()
    doc["jn_tail_slope"] = jn.slope
    doc["weight"] = ns.weight
    write_json(out / "analysis.json", doc)
    write_csv(out / "oscillation.csv", ["delta", "sup_mean_oscillation", "vmo_modulus"],
              [(d, v, m) for (d, v), (_, m) in zip(rep.per_scale, rep.vmo_modulus)])
    print(f"{'delta':>12} {'sup osc':>14} {'modulus':>14}")
    for (d, v), (_, m) in zip(rep.per_scale, rep.vmo_modulus):
        print(f"{d:>12.4g} {v:>14.6g} {m:>14.6g}")
    print(f"BMO estimate {rep.bmo_norm_estimate:.6g}  A-inf ratio sup {rep.ainfty_ratio_sup:.6g}  "
          f"doubling {rep.doubling_estimate:.6g}  JN slope {jn.slope:.4g}")
    return EXIT_OK, ["analysis.json", "oscillation.csv"]


COMMANDS = {
    "selfcheck": cmd_selfcheck,
    "extend": cmd_extend,
    "scan": cmd_scan,
    "vanish": cmd_vanish,
    "analyze": cmd_analyze,
}


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default="heatqc-out", help="output directory")
    common.add_argument("--config", help="flat key=value file; flags given here win")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--rel-tol", type=float, default=1e-8)
    common.add_argument("--abs-tol", type=float, default=1e-12)
    common.add_argument("--max-panels", type=int, default=4096)
    common.add_argument("--annulus-budget", type=int, default=16)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="heatqc", description="Heat-kernel extension, dilatation and Carleson diagnostics.")
    p.add_argument("--version", action="version", version=f"heatqc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("selfcheck", parents=[common], help="kernel moments, envelopes and the eta identity")

    e = sub.add_parser("extend", parents=[common], help="sample the extension and its dilatation on a grid")
    e.add_argument("--weight", default="unit")
    e.add_argument("--x", default="-1:1:21")
    e.add_argument("--t", default="0.1:10:log:11")

    s = sub.add_parser("scan", parents=[common], help="Carleson box energies with grid refinement")
    s.add_argument("--weight", default="sqrt")
    s.add_argument("--x0", default="-5:5:11")
    s.add_argument("--t", default="0.01:10:log:13")
    s.add_argument("--inner", default="32:32")
    s.add_argument("--rounds", type=int, default=3)

    v = sub.add_parser("vanish", parents=[common], help="sup over x0 of the box energy per scale")
    v.add_argument("--weight", default="expsine")
    v.add_argument("--x0", default=f"0:{2 * math.pi!r}:17")
    v.add_argument("--t", default="1,0.1,0.01,0.001")
    v.add_argument("--inner", default="32:32")

    a = sub.add_parser("analyze", parents=[common], help="BMO/VMO, A-infinity, John-Nirenberg, doubling")
    a.add_argument("--weight", default="expsine")
    a.add_argument("--window", default="-1:1")
    a.add_argument("--scales", default="1,0.1,0.01,0.001")
    a.add_argument("--samples", type=int, default=32)
    a.add_argument("--lambdas", default="0.25,0.5,1,2")
    return p


_NEG_VALUE = re.compile(r"^-[\d.]")


def _attach_negative_values(argv):
    """``--x -1:1:21`` -> ``--x=-1:1:21`` so grid values may start with a minus sign."""
    out = []
    for tok in argv:
        if out and _NEG_VALUE.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def parse_args(argv):
    argv = _attach_negative_values(list(argv))
    p = build_parser()
    ns = p.parse_args(argv)
    if ns.config:
        conf = read_config(ns.config)
        known = set(vars(ns)) - {"command", "config"}
        bad = sorted(set(conf) - known)
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")
        # re-parse with file values as defaults so explicit flags take precedence
        sub = p._subparsers._group_actions[0].choices[ns.command]
        sub.set_defaults(**conf)
        ns = p.parse_args(argv)
        for k in ("seed", "max_panels", "annulus_budget", "rounds", "samples"):
            if hasattr(ns, k):
                try:
                    setattr(ns, k, int(getattr(ns, k)))
                except ValueError:
                    raise ConfigError(f"{k} must be an integer") from None
        for k in ("rel_tol", "abs_tol"):
            try:
                setattr(ns, k, float(getattr(ns, k)))
            except ValueError:
                raise ConfigError(f"{k} must be a number") from None
    return ns


def run(argv=None) -> int:
    t0 = time.perf_counter()
    try:
        ns = parse_args(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"heatqc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Path(ns.out)
    try:
        _quad_cfg(ns)
        out.mkdir(parents=True, exist_ok=True)
        code, files = COMMANDS[ns.command](ns, out)
    except (ConfigError, DomainError, KeyError, FileNotFoundError) as exc:
        print(f"heatqc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonQuasiconformalSample, ToleranceNotMet, NonDoublingSuspected, SingularityError,
            FloatingPointError) as exc:
        print(f"heatqc: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, files, error = EXIT_NUMERIC, [], f"{type(exc).__name__}: {exc}"
    else:
        error = None
    manifest = {
        "command": ns.command,
        "config": {k: v for k, v in vars(ns).items() if k not in ("verbose",)},
        "versions": {"heatqc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "outputs": files,
        "exit_code": code,
        "error": error,
        "wall_time_s": time.perf_counter() - t0,
    }
    write_json(out / "manifest.json", manifest)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
