"""Solution counts across lambda, threshold bisection, and report persistence."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .nonlinearity import NonlinearityError
from .operator import ProblemFamily, RadialGrid, default_grid, fixed_point_residual
from .regimes import RegimeReport, UndeterminedLimitError, classify
from .solver import SolverConfig, boundary_shoot, march, multi_start

log = logging.getLogger(__name__)

UNDETERMINED = None
RESIDUAL_GATE = 1e-6
THREADS_ENV = "MA_RADIAL_THREADS"


class SweepError(ValueError):
    pass


class WindowViolation(AssertionError):
    """A solution was found where a nonexistence window forbids one."""


@dataclass
class Threshold:
    lam: float
    lo: float
    hi: float
    count_lo: Optional[int]
    count_hi: Optional[int]
    criterion: str = "count"
    non_monotone: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class PointResult:
    lam: float
    count: Optional[int]
    solutions: list
    note: str = ""


@dataclass
class SweepReport:
    lambdas: list
    counts: list
    solutions: list
    thresholds: list = field(default_factory=list)
    regime: Optional[dict] = None
    violations: list = field(default_factory=list)
    misses: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.counts) != len(self.lambdas) or len(self.solutions) != len(self.lambdas):
            raise ValueError("counts and solutions must match lambdas in length")

    def to_json(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "counts": ["undetermined" if c is None else c for c in self.counts],
            "solutions": [[{"norm": n, "alpha": list(a)} for n, a in sols] for sols in self.solutions],
            "thresholds": [asdict(t) for t in self.thresholds],
            "regime": self.regime,
            "violations": list(self.violations),
            "misses": list(self.misses),
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SweepReport":
        return cls(
            lambdas=[float(x) for x in data["lambdas"]],
            counts=[None if c == "undetermined" else int(c) for c in data["counts"]],
            solutions=[[(float(s["norm"]), tuple(float(a) for a in s["alpha"])) for s in sols]
                       for sols in data["solutions"]],
            thresholds=[Threshold(**t) for t in data.get("thresholds", [])],
            regime=data.get("regime"),
            violations=list(data.get("violations", [])),
            misses=list(data.get("misses", [])),
            notes=list(data.get("notes", [])),
        )


def worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return max(1, min(cap, n_tasks))


def _matches(a, b, cfg):
    na, aa = a
    nb, ab = b
    scale = max(1.0, na, nb)
    return abs(na - nb) <= cfg.dedupe_tol * scale and max(abs(x - y) for x, y in zip(aa, ab)) <= cfg.dedupe_tol * scale


def count_at(family: ProblemFamily, lam: float, grid: RadialGrid, cfg: SolverConfig) -> PointResult:
    """Shooting count at one lambda, cross-checked against multi_start."""
    p = family.at(lam)
    try:
        shot = boundary_shoot(p, cfg=cfg, grid=grid)
        picard = multi_start(p, grid, cfg)
    except NonlinearityError as exc:
        return PointResult(lam, UNDETERMINED, [], f"evaluation failed: {exc}")
    if shot.degenerate or picard.degenerate:
        return PointResult(lam, UNDETERMINED, [], "eigenvalue degeneracy (continuum of solutions)")
    found = []
    for rep in shot:
        if rep.trivial:
            continue
        if fixed_point_residual(p, grid, rep.state) > RESIDUAL_GATE * max(1.0, rep.norm):
            continue
        found.append((rep.norm, tuple(rep.alpha)))
    cross = [(rep.norm, tuple(rep.alpha)) for rep in picard]
    unmatched = [c for c in cross if not any(_matches(c, s, cfg) for s in found)]
    unmatched += [s for s in found if not any(_matches(s, c, cfg) for c in cross)]
    if unmatched:
        norms = ", ".join(f"{n:.6g}" for n, _ in unmatched)
        return PointResult(lam, UNDETERMINED, found, f"shoot and picard disagree (norms {norms})")
    return PointResult(lam, len(found), found)


def _check_lambdas(lambdas):
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise SweepError("lambda grid is empty")
    if any(not (x > 0 and math.isfinite(x)) for x in lambdas):
        raise SweepError("lambdas must be positive and finite")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise SweepError("lambdas must be strictly increasing")
    return lambdas


def lambda_sweep(family: ProblemFamily, lambdas, grid: Optional[RadialGrid] = None,
                 cfg: SolverConfig = SolverConfig(), strict: bool = True) -> SweepReport:
    """Count solutions at every lambda and mark where the count changes.

    Counts inside a certified nonexistence window must be zero; with
    ``strict`` a violation raises :class:`WindowViolation`. Counts below a
    certified existence guarantee are recorded in ``misses``.
    """
    lambdas = _check_lambdas(lambdas)
    grid = grid or default_grid()
    try:
        regime = classify(family)
    except UndeterminedLimitError as exc:
        regime = None
        notes = [str(exc)]
    else:
        notes = []

    with ThreadPoolExecutor(max_workers=worker_count(len(lambdas))) as pool:
        points = list(pool.map(lambda lam: count_at(family, lam, grid, cfg), lambdas))

    report = SweepReport(
        lambdas=lambdas,
        counts=[pt.count for pt in points],
        solutions=[pt.solutions for pt in points],
        regime=regime.to_json() if regime is not None else None,
        notes=notes + [f"lambda={pt.lam:g}: {pt.note}" for pt in points if pt.note],
    )
    if regime is not None:
        _audit(report, regime, strict)
    for k in range(len(lambdas) - 1):
        c0, c1 = report.counts[k], report.counts[k + 1]
        if c0 is not None and c1 is not None and c0 != c1:
            lo, hi = lambdas[k], lambdas[k + 1]
            report.thresholds.append(Threshold(0.5 * (lo + hi), lo, hi, c0, c1))
    return report


def _audit(report: SweepReport, regime: RegimeReport, strict: bool):
    for lam, count, sols in zip(report.lambdas, report.counts, report.solutions):
        need, forbidden = regime.expected_at(lam)
        n = count if count is not None else len(sols)
        if forbidden and n > 0:
            msg = f"lambda={lam:g}: {n} solution(s) inside a certified nonexistence window"
            report.violations.append(msg)
            if strict:
                raise WindowViolation(msg)
        if need and (count is None or count < need):
            report.misses.append(f"lambda={lam:g}: expected at least {need}, counted {count}")


def boundary_sign(family: ProblemFamily, lam: float, grid: RadialGrid, alpha=(1.0, 1.0)) -> float:
    """Sign of the first boundary value v1(1) when marching from ``alpha``."""
    _, ends = march(family.at(lam), np.asarray([alpha], dtype=float), grid)
    return float(np.sign(ends[0, 0]))


def threshold_bisect(family: ProblemFamily, bracket, grid: Optional[RadialGrid] = None,
                     cfg: SolverConfig = SolverConfig(), tol_lambda: float = 1e-4,
                     criterion: str = "count", alpha=(1.0, 1.0)) -> Threshold:
    """Bisect ``bracket`` down to ``tol_lambda`` on a change of the chosen criterion.

    ``criterion='count'`` uses :func:`count_at`; ``'boundary_sign'`` uses the
    sign of the boundary map at fixed ``alpha``, which flips at an eigenvalue
    of a problem homogeneous of degree N.
    """
    grid = grid or default_grid()
    lo, hi = (float(x) for x in bracket)
    if not 0 < lo < hi:
        raise SweepError("bracket must satisfy 0 < lo < hi")
    if not tol_lambda > 0:
        raise SweepError("tol_lambda must be positive")
    if criterion == "count":
        probe = lambda lam: count_at(family, lam, grid, cfg).count
    elif criterion == "boundary_sign":
        probe = lambda lam: boundary_sign(family, lam, grid, alpha)
    else:
        raise SweepError(f"unknown criterion {criterion!r}")

    c_lo, c_hi = probe(lo), probe(hi)
    if c_lo == c_hi:
        raise SweepError(f"criterion is equal at both ends of the bracket ({c_lo})")
    non_monotone = False
    while hi - lo > tol_lambda:
        mid = 0.5 * (lo + hi)
        c_mid = probe(mid)
        if c_mid == c_lo:
            lo = mid
        elif c_mid == c_hi:
            hi = mid
        else:
            # a third value: keep the first change point and say so
            non_monotone = True
            hi, c_hi = mid, c_mid
    return Threshold(0.5 * (lo + hi), lo, hi, c_lo, c_hi, criterion, non_monotone)


def is_homogeneous(family: ProblemFamily, probes=(0.1, 0.5, 1.0, 3.0, 10.0), rtol=1e-10) -> bool:
    """True when f and g are both homogeneous of degree N on the probes."""
    x = np.asarray(probes)
    for nl in (family.f, family.g):
        with np.errstate(all="ignore"):
            ratio = np.asarray(nl(x), dtype=float) / x ** family.N
        if not np.all(np.isfinite(ratio)) or np.ptp(ratio) > rtol * np.max(np.abs(ratio)):
            return False
    return True


def eigen_thresholds(family: ProblemFamily, lambdas, grid: Optional[RadialGrid] = None,
                     tol_lambda: float = 1e-4, alpha=(1.0, 1.0)) -> list:
    """Eigenvalues inside the swept range, from sign flips of the boundary map.

    Only meaningful for degree-N homogeneous problems, where the solutions
    exist exactly at eigenvalues and the solution count never changes between
    sweep points.
    """
    grid = grid or default_grid()
    lambdas = _check_lambdas(lambdas)
    signs = [boundary_sign(family, lam, grid, alpha) for lam in lambdas]
    found = []
    for k in range(len(lambdas) - 1):
        if signs[k] != signs[k + 1]:
            found.append(threshold_bisect(family, (lambdas[k], lambdas[k + 1]), grid,
                                          tol_lambda=tol_lambda, criterion="boundary_sign", alpha=alpha))
    return found


def refine_thresholds(family: ProblemFamily, report: SweepReport, grid: Optional[RadialGrid] = None,
                      cfg: SolverConfig = SolverConfig(), tol_lambda: float = 1e-4) -> list:
    """Bisect every count change of ``report``; homogeneous problems add eigenvalues."""
    grid = grid or default_grid()
    refined = []
    for t in report.thresholds:
        if t.criterion != "count" or t.width <= tol_lambda:
            refined.append(t)
            continue
        try:
            refined.append(threshold_bisect(family, (t.lo, t.hi), grid, cfg, tol_lambda))
        except SweepError as exc:
            report.notes.append(f"bisection of ({t.lo:g}, {t.hi:g}) abandoned: {exc}")
            refined.append(t)
    if is_homogeneous(family) and len(report.lambdas) > 1:
        refined += eigen_thresholds(family, report.lambdas, grid, tol_lambda)
    refined.sort(key=lambda t: t.lam)
    report.thresholds = refined
    return refined


# -- persistence ----------------------------------------------------------------

CSV_COLUMNS = ("lambda", "count", "norms")


def atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for lam, count, sols in zip(report.lambdas, report.counts, report.solutions):
        w.writerow([repr(lam), "undetermined" if count is None else count, ";".join(repr(n) for n, _ in sols)])
    return buf.getvalue()


def from_csv(text: str) -> SweepReport:
    """Rebuild the CSV-visible part of a report; center values are not stored in CSV."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"expected CSV header {','.join(CSV_COLUMNS)}")
    lambdas, counts, sols = [], [], []
    for row in rows[1:]:
        lam, count, norms = row
        lambdas.append(float(lam))
        counts.append(None if count == "undetermined" else int(count))
        sols.append([(float(n), ()) for n in norms.split(";") if n])
    return SweepReport(lambdas, counts, sols)


def write_report(report: SweepReport, path, fmt: str = "json"):
    if fmt == "json":
        atomic_write(path, json.dumps(report.to_json(), indent=2) + "\n")
    elif fmt == "csv":
        atomic_write(path, to_csv(report))
    else:
        raise ValueError(f"unknown format {fmt!r}")


THRESHOLD_COLUMNS = ("lambda_star", "lo", "hi", "count_lo", "count_hi", "criterion", "non_monotone")


def thresholds_csv(thresholds) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(THRESHOLD_COLUMNS)
    for t in thresholds:
        w.writerow([repr(t.lam), repr(t.lo), repr(t.hi), t.count_lo, t.count_hi, t.criterion, t.non_monotone])
    return buf.getvalue()


def read_report(path, fmt: Optional[str] = None) -> SweepReport:
    path = os.fspath(path)
    fmt = fmt or ("csv" if path.endswith(".csv") else "json")
    with open(path, newline="") as fh:
        text = fh.read()
    return from_csv(text) if fmt == "csv" else SweepReport.from_json(json.loads(text))
