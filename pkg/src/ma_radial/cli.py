"""``ma-radial``: solve, classify, sweep and verify radial Monge-Ampere systems.

Exit codes:
    0  success
    2  invalid input (problem file, arguments, empty lambda grid)
    3  solver failed to converge from every seed
    4  asymptotic limits undetermined, classification refused
    5  a verification property failed
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import nonlinearity as nlmod
from .expr import ExpressionSyntaxError
from .nonlinearity import ExtendedLimit, NonlinearityError
from .operator import ProblemFamily, RadialGrid, default_grid
from .regimes import UndeterminedLimitError, classify
from .solver import SolverConfig, multi_start
from .sweep import (
    SweepError,
    WindowViolation,
    atomic_write,
    lambda_sweep,
    refine_thresholds,
    thresholds_csv,
    write_report,
)
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3
EXIT_UNDETERMINED = 4
EXIT_PROPERTY_FAILED = 5

PROBLEM_KEYS = {"N", "lambda", "f", "g", "grid", "solver"}
NONLINEARITY_KEYS = {"family", "params", "expr", "limits"}

log = logging.getLogger("ma_radial")


class ProblemFileError(ValueError):
    pass


@dataclass
class Problem:
    family: ProblemFamily
    lam: Optional[float]
    grid: RadialGrid
    cfg: SolverConfig

    def spec(self):
        if self.lam is None:
            raise ProblemFileError("problem file has no 'lambda'")
        return self.family.at(self.lam)


def _nonlinearity(data, key: str) -> nlmod.Nonlinearity:
    if not isinstance(data, dict):
        raise ProblemFileError(f"'{key}' must be an object")
    unknown = set(data) - NONLINEARITY_KEYS
    if unknown:
        raise ProblemFileError(f"unknown key(s) in '{key}': {', '.join(sorted(unknown))}")
    if ("family" in data) == ("expr" in data):
        raise ProblemFileError(f"'{key}' needs exactly one of 'family' or 'expr'")
    try:
        if "expr" in data:
            if "params" in data:
                raise ProblemFileError(f"'{key}': 'params' only applies to families")
            nl = nlmod.parse_expression(str(data["expr"]))
        else:
            nl = nlmod.from_family(data["family"], data.get("params"))
    except ExpressionSyntaxError as exc:
        raise ProblemFileError(f"'{key}.expr': {exc}") from None
    except ValueError as exc:
        raise ProblemFileError(f"'{key}': {exc}") from None
    limits = data.get("limits", {})
    if not isinstance(limits, dict) or set(limits) - {"q0", "qinf"}:
        raise ProblemFileError(f"'{key}.limits' accepts only 'q0' and 'qinf'")
    try:
        declared = {k: ExtendedLimit.from_json(v) for k, v in limits.items()}
    except ValueError as exc:
        raise ProblemFileError(f"'{key}.limits': {exc}") from None
    return nl.with_limits(**declared) if declared else nl


def _solver_config(data) -> SolverConfig:
    if not isinstance(data, dict):
        raise ProblemFileError("'solver' must be an object")
    known = {f.name for f in fields(SolverConfig)}
    unknown = set(data) - known
    if unknown:
        raise ProblemFileError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
    opts = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        opts[k] = v
    try:
        return SolverConfig(**opts)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"'solver': {exc}") from None


def parse_problem(data) -> Problem:
    if not isinstance(data, dict):
        raise ProblemFileError("problem file must hold a JSON object")
    unknown = set(data) - PROBLEM_KEYS
    if unknown:
        raise ProblemFileError(f"unknown key(s): {', '.join(sorted(unknown))}")
    for key in ("N", "f", "g"):
        if key not in data:
            raise ProblemFileError(f"missing required key '{key}'")
    N = data["N"]
    if isinstance(N, bool) or not isinstance(N, int) or N < 1:
        raise ProblemFileError(f"'N' must be an integer >= 1, got {N!r}")
    lam = data.get("lambda")
    if lam is not None:
        if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not (lam > 0 and math.isfinite(lam)):
            raise ProblemFileError(f"'lambda' must be a positive number, got {lam!r}")
        lam = float(lam)
    grid_spec = data.get("grid", {})
    if not isinstance(grid_spec, dict) or set(grid_spec) - {"intervals"}:
        raise ProblemFileError("'grid' accepts only 'intervals'")
    M = grid_spec.get("intervals")
    if M is not None and (isinstance(M, bool) or not isinstance(M, int) or M < 4 or M % 4):
        raise ProblemFileError(f"'grid.intervals' must be a positive multiple of 4, got {M!r}")
    return Problem(
        ProblemFamily(N, _nonlinearity(data["f"], "f"), _nonlinearity(data["g"], "g")),
        lam,
        default_grid(M),
        _solver_config(data.get("solver", {})),
    )


def load_problem(path) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_problem(data)


# -- output helpers ---------------------------------------------------------------


def _default_out(command: str, fmt: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S%f")
    return Path("out") / f"{command}-{stamp}.{fmt}"


def _table(rows, headers) -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=True) + "\n"


# -- commands -------------------------------------------------------------------------


def cmd_solve(args) -> int:
    prob = load_problem(args.problem)
    if args.grid is not None:
        prob.grid = default_grid(args.grid)
    p = prob.spec()
    sols = multi_start(p, prob.grid, prob.cfg)
    fmt = args.format or "json"
    out = Path(args.out) if args.out else _default_out("solve", fmt)
    nodes = prob.grid.nodes
    if fmt == "json":
        payload = {
            "N": p.N,
            "lambda": p.lam,
            "f": p.f.to_json(),
            "g": p.g.to_json(),
            "nodes": nodes,
            "degenerate": sols.degenerate,
            "solutions": [dict(rep.summary(), v1=rep.state.v1, v2=rep.state.v2) for rep in sols],
        }
        atomic_write(out, _dump(payload))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["solution", "norm", "residual_fixed_point", "residual_oracle", "r", "v1", "v2"])
        for k, rep in enumerate(sols):
            for r, a, b in zip(nodes, rep.state.v1, rep.state.v2):
                w.writerow([k, repr(rep.norm), repr(rep.residual_fixed_point), repr(rep.residual_oracle),
                            repr(float(r)), repr(float(a)), repr(float(b))])
        atomic_write(out, buf.getvalue())

    rows = [(k, f"{rep.norm:.10g}", f"{rep.alpha[0]:.6g}", f"{rep.alpha[1]:.6g}",
             f"{rep.residual_fixed_point:.2e}", f"{rep.residual_oracle:.2e}", rep.method)
            for k, rep in enumerate(sols)]
    if args.format:
        summary = [{"norm": rep.norm, "alpha": list(rep.alpha), "residual_fixed_point": rep.residual_fixed_point,
                    "residual_oracle": rep.residual_oracle} for rep in sols]
        sys.stdout.write(_dump({"solutions": summary, "output": str(out)}))
    else:
        print(f"N={p.N} lambda={p.lam:g} f={p.f.label} g={p.g.label} grid M={prob.grid.M}")
        print(f"{len(sols)} nontrivial solution(s)" + (" (eigenvalue degeneracy)" if sols.degenerate else ""))
        if rows:
            print(_table(rows, ["#", "norm", "alpha1", "alpha2", "fp residual", "oracle", "method"]))
        print(f"written: {out}")
    if not sols and sols.attempts and not any(a.get("converged") for a in sols.attempts):
        print("error: no seed converged", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_classify(args) -> int:
    prob = load_problem(args.problem)
    try:
        report = classify(prob.family)
    except UndeterminedLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for key, ev in exc.evidence.items():
            tail = ", ".join(f"q({x:.3g})={q:.4g}" for x, q in ev)
            print(f"  {key}: {tail}", file=sys.stderr)
        if args.format == "json":
            sys.stdout.write(_dump({"undetermined": sorted(exc.evidence),
                                    "limits": {k: v.to_json() for k, v in exc.limits.items()}}))
        return EXIT_UNDETERMINED
    if args.format == "json":
        sys.stdout.write(_dump(report.to_json()))
        return EXIT_OK
    lim = report.limits
    print(f"f0={lim['f0']}  g0={lim['g0']}  f_inf={lim['finf']}  g_inf={lim['ginf']}")
    if not report.applicable_parts:
        print("no part applies")
    rows = []
    for part in report.applicable_parts:
        w = report.windows[part]
        guarantee = "exists for all lambda>0" if part in ("T1a", "T1b") else w.describe()
        rows.append((part, guarantee, w.provenance))
    if rows:
        print(_table(rows, ["part", "guarantee", "provenance"]))
    for note in report.notes:
        print(f"note: {note}")
    return EXIT_OK


def parse_lambda_grid(spec: str) -> list:
    """``"1,2,3"``, ``"lin:a:b:n"`` or ``"geom:a:b:n"``."""
    spec = spec.strip()
    if not spec:
        raise SweepError("lambda grid is empty")
    if spec.startswith(("lin:", "geom:")):
        kind, *rest = spec.split(":")
        if len(rest) != 3:
            raise SweepError(f"expected {kind}:start:stop:count, got {spec!r}")
        try:
            a, b, n = float(rest[0]), float(rest[1]), int(rest[2])
        except ValueError:
            raise SweepError(f"bad lambda grid {spec!r}") from None
        if n < 1:
            raise SweepError("lambda grid is empty")
        if kind == "geom" and not (a > 0 and b > 0):
            raise SweepError("geom grid endpoints must be positive")
        return (np.linspace if kind == "lin" else np.geomspace)(a, b, n).tolist()
    try:
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise SweepError(f"bad lambda grid {spec!r}") from None


def cmd_sweep(args) -> int:
    prob = load_problem(args.problem)
    if args.grid is not None:
        prob.grid = default_grid(args.grid)
    lambdas = parse_lambda_grid(args.lambda_grid)
    try:
        report = lambda_sweep(prob.family, lambdas, prob.grid, prob.cfg, strict=not args.lenient)
    except WindowViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    if args.bisect:
        refine_thresholds(prob.family, report, prob.grid, prob.cfg, args.tol_lambda)
    fmt = args.format or "csv"
    out = Path(args.out) if args.out else _default_out("sweep", fmt)
    write_report(report, out, fmt)
    tfile = None
    if args.bisect:
        tfile = out.with_name(out.stem + "-thresholds" + out.suffix)
        if fmt == "csv":
            atomic_write(tfile, thresholds_csv(report.thresholds))
        else:
            atomic_write(tfile, _dump([t.__dict__ for t in report.thresholds]))
    if args.format:
        sys.stdout.write(_dump({"report": report.to_json(), "output": str(out),
                                "thresholds_file": str(tfile) if tfile else None}))
    else:
        rows = [(f"{lam:g}", "undetermined" if c is None else c, "; ".join(f"{n:.6g}" for n, _ in s))
                for lam, c, s in zip(report.lambdas, report.counts, report.solutions)]
        print(_table(rows, ["lambda", "count", "norms"]))
        for t in report.thresholds:
            flag = " (non-monotone)" if t.non_monotone else ""
            print(f"threshold lambda*={t.lam:.8g} in [{t.lo:.8g}, {t.hi:.8g}] via {t.criterion}{flag}")
        for msg in report.violations + report.misses + report.notes:
            print(f"note: {msg}")
        print(f"written: {out}" + (f", {tfile}" if tfile else ""))
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise ProblemFileError("--trials must be a positive integer")
    results = run_suite(args.suite, args.trials, args.seed)
    ok = all(r.passed for r in results)
    if args.format == "json":
        sys.stdout.write(_dump({"suite": args.suite, "seed": args.seed, "passed": ok,
                                "properties": [r.to_json() for r in results]}))
    else:
        for r in results:
            print(r.line())
        print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'} (seed {args.seed})")
    return EXIT_OK if ok else EXIT_PROPERTY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ma-radial", description=__doc__.splitlines()[0],
                                     epilog="exit codes: 0 ok, 2 invalid input, 3 no convergence, "
                                            "4 undetermined limits, 5 property failure")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="find the nontrivial solutions at one lambda")
    s.add_argument("problem", help="problem JSON file")
    s.add_argument("--grid", type=int, metavar="M", help="number of radial intervals (multiple of 4)")
    s.add_argument("--out", help="output path (default ./out/solve-<timestamp>.<format>)")
    s.add_argument("--format", choices=("csv", "json"))
    s.set_defaults(run=cmd_solve)

    c = sub.add_parser("classify", help="applicable existence/nonexistence parts and lambda windows")
    c.add_argument("problem")
    c.add_argument("--format", choices=("json",))
    c.set_defaults(run=cmd_classify)

    w = sub.add_parser("sweep", help="solution counts over a lambda grid")
    w.add_argument("problem")
    w.add_argument("--lambda-grid", required=True, metavar="SPEC",
                   help="'1,2,3', 'lin:a:b:n' or 'geom:a:b:n'")
    w.add_argument("--bisect", action="store_true", help="refine count changes (and eigenvalues)")
    w.add_argument("--tol-lambda", type=float, default=1e-4)
    w.add_argument("--grid", type=int, metavar="M")
    w.add_argument("--out", help="output path (default ./out/sweep-<timestamp>.<format>)")
    w.add_argument("--format", choices=("csv", "json"))
    w.add_argument("--lenient", action="store_true",
                   help="record nonexistence-window violations instead of failing")
    w.set_defaults(run=cmd_sweep)

    v = sub.add_parser("verify", help="randomized property suites")
    v.add_argument("--suite", choices=SUITES, required=True)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--format", choices=("json",))
    v.set_defaults(run=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.run(args)
    except (ProblemFileError, SweepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonlinearityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
