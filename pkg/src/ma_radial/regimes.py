"""Which existence / multiplicity / nonexistence statements apply, and where.

The four quotients f0, g0, f_inf, g_inf select the applicable parts:

    T1a  f0 = g0 = 0,   f_inf = g_inf = inf      one solution, every lambda
    T1b  f0 = g0 = inf, f_inf = g_inf = 0        one solution, every lambda
    T2a  f0 = g0 = 0  or  f_inf = g_inf = 0      one solution, lambda > lambda0
    T2b  f0 = g0 = inf or f_inf = g_inf = inf    one solution, lambda < lambda0
    T2c  all four 0                              two solutions, lambda > lambda0
    T2d  all four inf                            two solutions, lambda < lambda0
    T2e  all four finite (0 allowed)             none, lambda < (1/(2 eps))^N
    T2f  all four positive (inf allowed)         none, lambda > (1/(Gamma eps))^N

T2* additionally need f, g > 0 on (0, inf). The lambda0 of T2a-T2d is only
shown to exist; here it is replaced by a sufficient certificate from the
weak shell bounds, optimized over the shell radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import nonlinearity as nlmod
from .nonlinearity import ExtendedLimit, Nonlinearity, asymptotic_quotient, envelope_curve
from .operator import ProblemFamily, ProblemSpec, gamma_constant, weak_bounds

PARTS = ("T1a", "T1b", "T2a", "T2b", "T2c", "T2d", "T2e", "T2f")

SEARCH_RANGE = (1e-6, 1e6)
SEARCH_POINTS = 2401
CERT_RADII = tuple(np.geomspace(1e-3, 1e3, 61).tolist())
SAFETY = 1e-9


class UndeterminedLimitError(ValueError):
    """Classification refused because a quotient limit could not be decided."""

    def __init__(self, limits: dict):
        bad = {k: v for k, v in limits.items() if v.kind == nlmod.UNDETERMINED}
        super().__init__("undetermined asymptotic quotient(s): " + ", ".join(sorted(bad)))
        self.limits = limits
        self.evidence = {k: v.evidence for k, v in bad.items()}


@dataclass(frozen=True)
class Window:
    """A lambda interval carrying a guarantee; ``min_count`` 0 means no solutions."""

    part: str
    lo: float
    hi: float
    min_count: int
    lambda0: Optional[float] = None
    provenance: str = ""

    def contains(self, lam: float) -> bool:
        return self.lo < lam < self.hi

    def to_json(self):
        return {
            "part": self.part,
            "lo": _num(self.lo),
            "hi": _num(self.hi),
            "min_count": self.min_count,
            "lambda0": _num(self.lambda0),
            "provenance": self.provenance,
        }

    def describe(self) -> str:
        lo = "0" if self.lo == 0 else f"{self.lo:.6g}"
        hi = "inf" if math.isinf(self.hi) else f"{self.hi:.6g}"
        what = {0: "no nontrivial solution", 1: "at least one solution", 2: "at least two solutions"}[self.min_count]
        return f"({lo}, {hi}): {what}"


def _num(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf"
    return x


@dataclass
class RegimeReport:
    limits: dict
    applicable_parts: list
    windows: dict = field(default_factory=dict)
    positive: bool = True
    notes: list = field(default_factory=list)

    @property
    def predicted_count(self) -> list:
        """(lo, hi, minimum count or 'none') per applicable part."""
        return [(w.lo, w.hi, "none" if w.min_count == 0 else w.min_count) for w in self.windows.values()]

    def expected_at(self, lam: float):
        """(minimum guaranteed count, nonexistence certified) at ``lam``."""
        need = 0
        forbidden = False
        for w in self.windows.values():
            if w.contains(lam):
                if w.min_count == 0:
                    forbidden = True
                else:
                    need = max(need, w.min_count)
        return need, forbidden

    def to_json(self):
        return {
            "limits": {k: v.to_json() for k, v in self.limits.items()},
            "applicable_parts": list(self.applicable_parts),
            "windows": {k: w.to_json() for k, w in self.windows.items()},
            "positive": self.positive,
            "notes": list(self.notes),
        }


def quotient_limits(N: int, f: Nonlinearity, g: Nonlinearity) -> dict:
    return {
        "f0": asymptotic_quotient(f, N, nlmod.ZERO_END),
        "g0": asymptotic_quotient(g, N, nlmod.ZERO_END),
        "finf": asymptotic_quotient(f, N, nlmod.INF_END),
        "ginf": asymptotic_quotient(g, N, nlmod.INF_END),
    }


def _is_positive(nl: Nonlinearity) -> bool:
    if not nl.positivity:
        return False
    x = np.geomspace(*SEARCH_RANGE, 121)
    with np.errstate(all="ignore"):
        y = np.asarray(nl(x), dtype=float) * np.ones_like(x)
    return bool(np.all((y > 0) | np.isposinf(y)))


def applicable(limits: dict, positive: bool) -> list:
    f0, g0, fi, gi = (limits[k] for k in ("f0", "g0", "finf", "ginf"))
    zero = lambda *ls: all(l.is_zero for l in ls)
    inf = lambda *ls: all(l.is_infinite for l in ls)
    parts = []
    if zero(f0, g0) and inf(fi, gi):
        parts.append("T1a")
    if inf(f0, g0) and zero(fi, gi):
        parts.append("T1b")
    if positive:
        if zero(f0, g0) or zero(fi, gi):
            parts.append("T2a")
        if inf(f0, g0) or inf(fi, gi):
            parts.append("T2b")
        if zero(f0, g0, fi, gi):
            parts.append("T2c")
        if inf(f0, g0, fi, gi):
            parts.append("T2d")
        if not any(l.is_infinite for l in (f0, g0, fi, gi)):
            parts.append("T2e")
        if not any(l.is_zero for l in (f0, g0, fi, gi)):
            parts.append("T2f")
    return parts


def _family(p) -> ProblemFamily:
    return p if isinstance(p, ProblemFamily) else ProblemFamily.of(p)


def classify(p: Union[ProblemSpec, ProblemFamily]) -> RegimeReport:
    """Applicable parts with their lambda windows. Raises on undetermined limits."""
    fam = _family(p)
    limits = quotient_limits(fam.N, fam.f, fam.g)
    if any(l.kind == nlmod.UNDETERMINED for l in limits.values()):
        raise UndeterminedLimitError(limits)
    positive = _is_positive(fam.f) and _is_positive(fam.g)
    parts = applicable(limits, positive)
    report = RegimeReport(limits, parts, positive=positive)
    if not positive:
        report.notes.append("f or g vanishes somewhere on (0, inf); the T2 parts need f, g > 0")
    inf = math.inf
    for part in parts:
        if part in ("T1a", "T1b"):
            report.windows[part] = Window(part, 0.0, inf, 1, None, "exists for all lambda > 0")
        elif part in ("T2a", "T2c"):
            lam0, r1 = existence_certificate(fam, "above")
            count = 1 if part == "T2a" else 2
            report.windows[part] = Window(part, lam0, inf, count, lam0,
                                          f"sufficient certificate from the shell r1={r1:.4g} (not sharp)")
        elif part in ("T2b", "T2d"):
            lam0, r1 = existence_certificate(fam, "below")
            count = 1 if part == "T2b" else 2
            report.windows[part] = Window(part, 0.0, lam0, count, lam0,
                                          f"sufficient certificate from the shell r1={r1:.4g} (not sharp)")
        elif part == "T2e":
            lam0 = nonexistence_window(fam, "T2e")
            report.windows[part] = Window(part, 0.0, lam0, 0, lam0, "lambda0 = (1/(2 eps))^N, eps from sup f^/v^N")
        elif part == "T2f":
            lam0 = nonexistence_window(fam, "T2f")
            report.windows[part] = Window(part, lam0, inf, 0, lam0, "lambda0 = (1/(Gamma eps))^N, eps from inf f/v^N")
    return report


def existence_certificate(p, side: str, radii=CERT_RADII, resolution: int = 512):
    """Best shell certificate for T2a/T2c (``side='above'``) or T2b/T2d (``'below'``).

    above: expansion on the shell r needs 4 lam^(1/N) Gamma m_hat_r^(1/N) > r,
    i.e. lam > r^N / ((4 Gamma)^N m_hat_r); the smallest such bound wins.
    below: compression needs 2 lam^(1/N) M_hat_r^(1/N) < r, i.e.
    lam < (r/2)^N / M_hat_r; the largest such bound wins.
    Returns ``(lambda0, r)``.
    """
    fam = _family(p)
    N = fam.N
    unit = fam.at(1.0)
    gamma = gamma_constant(N)
    best = (math.inf, None) if side == "above" else (0.0, None)
    for r in radii:
        try:
            wb = weak_bounds(unit, r, resolution)
        except nlmod.NonlinearityError:
            continue
        if side == "above":
            if wb.m_hat <= 0:
                continue
            lam0 = r ** N / ((4.0 * gamma) ** N * wb.m_hat) * (1.0 + SAFETY)
            if lam0 < best[0]:
                best = (lam0, r)
        else:
            if wb.M_hat <= 0:
                continue
            lam0 = (r / 2.0) ** N / wb.M_hat * (1.0 - SAFETY)
            if lam0 > best[0]:
                best = (lam0, r)
    if best[1] is None:
        raise ValueError("no shell radius yields a certificate")
    return best


def _refine_log(fun, lo, hi, sense, iters=80):
    """Golden-section extremum of fun(exp(u)) for u in [log lo, log hi]."""
    from .nonlinearity import _golden_max

    sign = 1.0 if sense == "max" else -1.0
    val = _golden_max(lambda u: sign * fun(math.exp(u)), math.log(lo), math.log(hi), iters)
    return sign * val


def quotient_extremum(nl: Nonlinearity, N: int, sense: str, use_envelope: bool,
                      search=SEARCH_RANGE, points: int = SEARCH_POINTS) -> float:
    """sup (or inf) over v > 0 of h(v)/v^N, grid plus refinement plus end limits."""
    v = np.geomspace(search[0], search[1], points)
    with np.errstate(all="ignore"):
        h = envelope_curve(nl, v) if use_envelope else np.asarray(nl(v), dtype=float) * np.ones_like(v)
        q = h / np.power(v, N)
    if np.any(np.isnan(q)):
        raise nlmod.NonlinearityError(f"{nl.label}: invalid quotient values in the search range")

    def quotient(x):
        with np.errstate(all="ignore"):
            return float(nl(x)) / x ** N

    k = int(np.argmax(q) if sense == "max" else np.argmin(q))
    best = float(q[k])
    if np.isfinite(best):
        lo, hi = v[max(k - 1, 0)], v[min(k + 1, points - 1)]
        refined = _refine_log(quotient, lo, hi, sense)
        if math.isfinite(refined):
            best = max(best, refined) if sense == "max" else min(best, refined)
    ends = [asymptotic_quotient(nl, N, nlmod.ZERO_END).numeric, asymptotic_quotient(nl, N, nlmod.INF_END).numeric]
    for e in ends:
        if math.isnan(e):
            continue
        best = max(best, e) if sense == "max" else min(best, e)
    return best


def nonexistence_window(p, part: str, resolution: int = SEARCH_POINTS) -> float:
    """lambda0 of T2e (no solutions below) or T2f (no solutions above).

    Grid extrema are pushed by a relative ``SAFETY`` margin so estimation error
    shrinks the certified window rather than enlarging it.
    """
    fam = _family(p)
    N = fam.N
    if part == "T2e":
        sup = max(quotient_extremum(h, N, "max", True, points=resolution) for h in (fam.f, fam.g))
        if not math.isfinite(sup):
            raise ValueError("quotient unbounded on the search range; T2e does not apply")
        eps_N = sup * (1.0 + SAFETY)
        return 1.0 / (2.0 ** N * eps_N)
    if part == "T2f":
        inf = min(quotient_extremum(h, N, "min", False, points=resolution) for h in (fam.f, fam.g))
        if not inf > 0:
            raise ValueError("quotient infimum is zero; T2f does not apply")
        eps_N = inf * (1.0 - SAFETY)
        return 1.0 / (gamma_constant(N) ** N * eps_N)
    raise ValueError(f"part must be 'T2e' or 'T2f', got {part!r}")


def epsilon(p, part: str) -> float:
    """The eps behind a nonexistence window, recovered from lambda0."""
    fam = _family(p)
    lam0 = nonexistence_window(fam, part)
    if part == "T2e":
        return 0.5 * lam0 ** (-1.0 / fam.N)
    return lam0 ** (-1.0 / fam.N) / gamma_constant(fam.N)
