"""Scalar nonlinearities f, g: [0, inf) -> [0, inf) and their asymptotics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import expr

log = logging.getLogger(__name__)

ZERO = "zero"
FINITE = "finite"
INFINITE = "inf"
UNDETERMINED = "undetermined"

ZERO_END = "zero"
INF_END = "inf"

# limit-classification heuristics
PROBE_COUNT = 40
ZERO_THRESHOLD = 1e-8
INF_THRESHOLD = 1e8
STABLE_WINDOW = 5
STABLE_RTOL = 1e-3

_PROBE_POINTS = np.linspace(0.0, 10.0, 41)[1:]


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class ExtendedLimit:
    """Value of lim f(x)/x^N at one end; ``value`` is set only for ``finite``."""

    kind: str
    value: Optional[float] = None
    evidence: tuple = ()

    def __post_init__(self):
        if self.kind not in (ZERO, FINITE, INFINITE, UNDETERMINED):
            raise ValueError(f"unknown limit kind {self.kind!r}")
        if self.kind == FINITE and (self.value is None or not self.value >= 0):
            raise ValueError("finite limit needs a nonnegative value")

    @property
    def is_zero(self):
        return self.kind == ZERO or (self.kind == FINITE and self.value == 0.0)

    @property
    def is_infinite(self):
        return self.kind == INFINITE

    @property
    def numeric(self) -> float:
        """The limit as a float (0, value, or inf); nan when undetermined."""
        return {ZERO: 0.0, INFINITE: math.inf, UNDETERMINED: math.nan}.get(self.kind, self.value)

    def to_json(self):
        if self.kind == FINITE:
            return self.value
        return self.kind

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            if data in (ZERO, INFINITE):
                return cls(data)
            raise ValueError(f"declared limit must be 'zero', 'inf' or a number, got {data!r}")
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            raise ValueError(f"declared limit must be 'zero', 'inf' or a number, got {data!r}")
        if data < 0:
            raise ValueError("declared limit must be nonnegative")
        return cls(ZERO) if data == 0 else cls(FINITE, float(data))

    def __str__(self):
        if self.kind == FINITE:
            return f"{self.value:.6g}"
        return {ZERO: "0", INFINITE: "inf", UNDETERMINED: "?"}[self.kind]


@dataclass(frozen=True)
class Nonlinearity:
    """A nonnegative continuous map on [0, inf).

    ``evaluator`` must accept scalars or ndarrays. ``declared_limits`` maps
    ``"q0"``/``"qinf"`` to an :class:`ExtendedLimit` that overrides estimation.
    """

    evaluator: Callable
    source: tuple
    declared_limits: dict = field(default_factory=dict)
    positivity: bool = True
    warnings: tuple = ()

    def __call__(self, x):
        """Unchecked vectorized evaluation (hot path of the operator)."""
        return self.evaluator(x)

    @property
    def label(self) -> str:
        kind = self.source[0]
        if kind == "expr":
            return self.source[1]
        params = ", ".join(f"{k}={v:g}" for k, v in self.source[1].items())
        return f"{kind}({params})" if params else kind

    def with_limits(self, q0=None, qinf=None) -> "Nonlinearity":
        limits = dict(self.declared_limits)
        if q0 is not None:
            limits["q0"] = q0
        if qinf is not None:
            limits["qinf"] = qinf
        return Nonlinearity(self.evaluator, self.source, limits, self.positivity, self.warnings)

    def to_json(self):
        if self.source[0] == "expr":
            out = {"expr": self.source[1]}
        else:
            out = {"family": self.source[0], "params": dict(self.source[1])}
        if self.declared_limits:
            out["limits"] = {k: v.to_json() for k, v in self.declared_limits.items()}
        return out


def eval(nl: Nonlinearity, x) -> float:
    """Checked evaluation of ``nl`` at a single nonnegative point."""
    x = float(x)
    if not x >= 0:
        raise NonlinearityError(f"nonlinearity evaluated at negative argument {x!r}")
    with np.errstate(all="ignore"):
        y = float(nl.evaluator(x))
    if not math.isfinite(y) or y < 0:
        raise NonlinearityError(f"{nl.label} returned {y!r} at x={x!r}")
    return y


# -- builtin families ---------------------------------------------------------


def power(p: float = 1.0) -> Nonlinearity:
    if p <= 0:
        raise ValueError("power family needs p > 0")
    return Nonlinearity(lambda x: np.power(x, p), ("power", {"p": float(p)}))


def constant(c: float = 1.0) -> Nonlinearity:
    if c < 0:
        raise ValueError("constant family needs c >= 0")
    return Nonlinearity(lambda x: c + 0.0 * np.asarray(x, dtype=float), ("constant", {"c": float(c)}),
                        positivity=c > 0)


def linear() -> Nonlinearity:
    return Nonlinearity(lambda x: 1.0 * np.asarray(x, dtype=float), ("linear", {}))


def _ratio_bump(x):
    x2 = np.square(x)
    return x2 / (1.0 + x2)


def ratio_bump() -> Nonlinearity:
    return Nonlinearity(_ratio_bump, ("ratio_bump", {}))


def exp_minus_one() -> Nonlinearity:
    return Nonlinearity(np.expm1, ("exp_minus_one", {}))


FAMILIES = {
    "power": power,
    "constant": constant,
    "linear": linear,
    "ratio_bump": ratio_bump,
    "exp_minus_one": exp_minus_one,
}


def from_family(name: str, params: Optional[dict] = None) -> Nonlinearity:
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    try:
        return factory(**(params or {}))
    except TypeError as exc:
        raise ValueError(f"bad parameters for family {name!r}: {exc}") from None


def parse_expression(text: str) -> Nonlinearity:
    """Build a nonlinearity from an expression in ``x``.

    Negative values at the probe points 0.25, 0.5, ..., 10 are recorded in
    ``warnings`` rather than rejected.
    """
    tree = expr.parse(text)

    def evaluator(x, _tree=tree):
        return expr.evaluate(_tree, x)

    notes = []
    with np.errstate(all="ignore"):
        probe = evaluator(_PROBE_POINTS)
    bad = _PROBE_POINTS[probe < 0]
    if bad.size:
        notes.append(f"expression is negative at probe x={bad[0]:g}")
        log.warning("%s: %s", text, notes[-1])
    positive = bool(np.all(probe > 0))
    return Nonlinearity(evaluator, ("expr", text), positivity=positive, warnings=tuple(notes))


# -- envelope -----------------------------------------------------------------

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(fun, a, b, iters=60):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
        if b - a <= 1e-14 * max(1.0, abs(b)):
            break
    return max(fc, fd)


def envelope(nl: Nonlinearity, t: float, resolution: int = 256) -> float:
    """Running maximum max{f(v): 0 <= v <= t}.

    Grid maximum over ``resolution + 1`` points, then one golden-section pass
    on the two cells around the discrete argmax.
    """
    if not t >= 0:
        raise NonlinearityError(f"envelope needs t >= 0, got {t!r}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if t == 0:
        return eval(nl, 0.0)
    grid = np.linspace(0.0, t, resolution + 1)
    with np.errstate(all="ignore"):
        values = np.asarray(nl.evaluator(grid), dtype=float) * np.ones_like(grid)
    bad = np.isnan(values) | (values < 0) | np.isneginf(values)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NonlinearityError(f"{nl.label} returned {values[k]!r} at x={grid[k]!r}")
    k = int(np.argmax(values))
    best = float(values[k])
    # overflow (+inf) is kept: the envelope of an overflowing map is unbounded
    if k < resolution and math.isfinite(best):
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, resolution)]
        refined = _golden_max(lambda v: eval(nl, v), lo, hi)
        best = max(best, refined)
    return best


def envelope_curve(nl: Nonlinearity, ts) -> np.ndarray:
    """Running maximum of ``nl`` along an increasing array ``ts`` starting near 0.

    Cheap discrete envelope used for quotient scans; ``f(0)`` is included.
    """
    ts = np.asarray(ts, dtype=float)
    with np.errstate(all="ignore"):
        values = np.asarray(nl.evaluator(ts), dtype=float) * np.ones_like(ts)
        f0 = float(nl.evaluator(0.0))
    return np.maximum.accumulate(np.maximum(values, f0))


def envelope_function(nl: Nonlinearity, resolution: int = 256) -> Nonlinearity:
    """The envelope as a Nonlinearity of its own (scalar evaluation only)."""

    def evaluator(x):
        if np.ndim(x):
            return np.array([envelope(nl, float(v), resolution) for v in np.ravel(x)]).reshape(np.shape(x))
        return envelope(nl, float(x), resolution)

    return Nonlinearity(evaluator, ("envelope", {"resolution": resolution}), positivity=nl.positivity)


# -- asymptotic quotients -------------------------------------------------------


def quotient_probes(end: str, count: int = PROBE_COUNT) -> np.ndarray:
    k = np.arange(1, count + 1, dtype=float)
    return np.power(2.0, -k) if end == ZERO_END else np.power(2.0, k)


def classify_quotients(q, zero_threshold=ZERO_THRESHOLD, inf_threshold=INF_THRESHOLD,
                       window=STABLE_WINDOW, rtol=STABLE_RTOL) -> tuple:
    """Classify a quotient sequence ordered toward the limit; returns (kind, value)."""
    tail = np.asarray(q[-window:], dtype=float)
    if np.any(np.isnan(tail)):
        return UNDETERMINED, None
    nonincreasing = bool(np.all(tail[1:] <= tail[:-1]))
    nondecreasing = bool(np.all(tail[1:] >= tail[:-1]))
    if np.all(tail < zero_threshold) and nonincreasing:
        return ZERO, None
    if np.all(tail > inf_threshold) and nondecreasing:
        return INFINITE, None
    if np.all(np.isfinite(tail)):
        scale = np.max(np.abs(tail))
        if scale > 0 and np.max(tail) - np.min(tail) <= rtol * scale:
            return FINITE, float(tail[-1])
    return UNDETERMINED, None


def asymptotic_quotient(nl: Nonlinearity, N: int, end: str, **thresholds) -> ExtendedLimit:
    """Limit of f(x)/x^N at ``end`` ("zero" or "inf"); declared limits win."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if end not in (ZERO_END, INF_END):
        raise ValueError(f"end must be {ZERO_END!r} or {INF_END!r}")
    key = "q0" if end == ZERO_END else "qinf"
    if key in nl.declared_limits:
        return nl.declared_limits[key]
    x = quotient_probes(end)
    with np.errstate(all="ignore"):
        fx = np.asarray(nl.evaluator(x), dtype=float) * np.ones_like(x)
        q = fx / np.power(x, N)
    # overflow toward infinity is evidence for an infinite limit
    q = np.where(np.isposinf(fx), np.inf, q)
    if np.any(np.isnan(fx)) or np.any(fx < 0):
        k = int(np.flatnonzero(np.isnan(fx) | (fx < 0))[0])
        raise NonlinearityError(f"{nl.label} returned {fx[k]!r} at probe x={x[k]!r}")
    kind, value = classify_quotients(q, **thresholds)
    evidence = tuple(zip(x[-STABLE_WINDOW:].tolist(), q[-STABLE_WINDOW:].tolist()))
    return ExtendedLimit(kind, value, evidence)
