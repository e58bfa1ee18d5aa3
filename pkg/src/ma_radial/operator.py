"""Radial discretization of the cone operator T_lambda and the lemma quantities.

For a pair (v1, v2) sampled on a radial grid the operator is

    T1(r) = int_r^1 ( lam * int_0^s N t^(N-1) f(v2(t)) dt )^(1/N) ds

and symmetrically for T2 with g(v1). Both integrals are accumulated interval
by interval with Simpson's rule; the state is interpolated linearly to the
interval midpoints. The inner integral at midpoints uses the half-interval
Simpson companion ``h/24 (5a + 8b - c)`` so the outer rule sees the same
quadratic model.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nonlinearity import Nonlinearity, NonlinearityError, _golden_max, eval as nl_eval
from .quadrature import adaptive_simpson

CONE_TOL = 1e-9
QUARTER = 0.25
CONE_INTERVAL = (0.25, 0.75)
DEFAULT_INTERVALS = 512


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the transformed system: dimension, parameter, (f, g)."""

    N: int
    lam: float
    f: Nonlinearity
    g: Nonlinearity

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        if not self.lam > 0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be a positive real, got {self.lam!r}")

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return ProblemSpec(self.N, lam, self.f, self.g)


@dataclass(frozen=True)
class ProblemFamily:
    """A problem with the parameter left open (sweeps and classification)."""

    N: int
    f: Nonlinearity
    g: Nonlinearity

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")

    def at(self, lam: float) -> ProblemSpec:
        return ProblemSpec(self.N, lam, self.f, self.g)

    @classmethod
    def of(cls, p: ProblemSpec) -> "ProblemFamily":
        return cls(p.N, p.f, p.g)


class RadialGrid:
    """Strictly increasing nodes 0 = r_0 < ... < r_M = 1 containing 1/4 and 3/4."""

    rule = "simpson-midpoint"

    def __init__(self, nodes):
        nodes = np.array(nodes, dtype=float)
        nodes.setflags(write=False)
        if nodes.ndim != 1 or nodes.size < 9:
            raise ValueError("a radial grid needs at least 8 intervals")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("grid endpoints must be exactly 0 and 1")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        self.nodes = nodes
        self.h = np.diff(nodes)
        self.mid = 0.5 * (nodes[:-1] + nodes[1:])

    @classmethod
    def uniform(cls, M: int = DEFAULT_INTERVALS) -> "RadialGrid":
        if M < 8:
            raise ValueError("a radial grid needs at least 8 intervals")
        nodes = np.linspace(0.0, 1.0, M + 1)
        extra = [x for x in CONE_INTERVAL if not np.any(np.abs(nodes - x) < 1e-14)]
        if extra:
            nodes = np.unique(np.concatenate([nodes, extra]))
        else:
            for x in CONE_INTERVAL:
                nodes[np.argmin(np.abs(nodes - x))] = x
        return cls(nodes)

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def spacing(self) -> float:
        return float(self.h.max())

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())

    def __repr__(self):
        return f"RadialGrid(M={self.M})"


@dataclass(frozen=True, eq=False)
class StatePair:
    """Sampled pair (v1, v2) on a radial grid."""

    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        v1 = np.asarray(self.v1, dtype=float)
        v2 = np.asarray(self.v2, dtype=float)
        if v1.shape != v2.shape or v1.ndim != 1:
            raise ValueError("v1 and v2 must be 1-D arrays of equal length")
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    @classmethod
    def from_functions(cls, grid: RadialGrid, fun1, fun2=None) -> "StatePair":
        fun2 = fun1 if fun2 is None else fun2
        return cls(fun1(grid.nodes) * np.ones_like(grid.nodes), fun2(grid.nodes) * np.ones_like(grid.nodes))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "StatePair":
        return cls(np.zeros_like(grid.nodes), np.zeros_like(grid.nodes))

    def norm(self) -> float:
        """Pair norm: sum of component sup-norms."""
        return float(np.max(np.abs(self.v1)) + np.max(np.abs(self.v2)))

    @property
    def center(self) -> tuple:
        return float(self.v1[0]), float(self.v2[0])

    def clamped(self) -> "StatePair":
        return StatePair(np.maximum(self.v1, 0.0), np.maximum(self.v2, 0.0))

    def scaled(self, c: float) -> "StatePair":
        return StatePair(c * self.v1, c * self.v2)

    def __sub__(self, other):
        return StatePair(self.v1 - other.v1, self.v2 - other.v2)

    def __add__(self, other):
        return StatePair(self.v1 + other.v1, self.v2 + other.v2)

    def __len__(self):
        return self.v1.size

    def allfinite(self) -> bool:
        return bool(np.all(np.isfinite(self.v1)) and np.all(np.isfinite(self.v2)))

    def to_json(self):
        return {"v1": self.v1.tolist(), "v2": self.v2.tolist()}


def pair_distance(a: StatePair, b: StatePair) -> float:
    return (a - b).norm()


# -- the operator ---------------------------------------------------------------


def _weights(N, t):
    return N * np.power(t, N - 1)


def _checked(nl: Nonlinearity, x):
    with np.errstate(all="ignore"):
        y = np.asarray(nl(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(y)):
        raise NonlinearityError(f"{nl.label} produced a non-finite value")
    if np.any(y < 0):
        raise NonlinearityError(f"{nl.label} produced a negative value")
    return y


def simpson_increments(h, a, b, c):
    """Full- and half-interval Simpson integrals of the quadratic through (a, b, c)."""
    full = h * (a + 4.0 * b + c) / 6.0
    half = h * (5.0 * a + 8.0 * b - c) / 24.0
    return full, half


def _root(I, N):
    I = np.maximum(I, 0.0)
    if N == 1:
        return I
    if N == 2:
        return np.sqrt(I)
    return np.power(I, 1.0 / N)


def component(lam: float, N: int, grid: RadialGrid, fv_nodes, fv_mid) -> np.ndarray:
    """One component of T given f(v) sampled at nodes and interval midpoints."""
    h = grid.h
    phi = _weights(N, grid.nodes) * fv_nodes
    phim = _weights(N, grid.mid) * fv_mid
    full, half = simpson_increments(h, phi[:-1], phim, phi[1:])
    inner = np.concatenate(([0.0], np.cumsum(full)))
    D = _root(lam * inner, N)
    Dm = _root(lam * (inner[:-1] + half), N)
    outer = h * (D[:-1] + 4.0 * Dm + D[1:]) / 6.0
    out = np.zeros_like(grid.nodes)
    out[:-1] = np.cumsum(outer[::-1])[::-1]
    return out


def apply_T(p: ProblemSpec, grid: RadialGrid, s: StatePair) -> StatePair:
    """Evaluate (T1, T2) at the grid nodes. Output vanishes at r = 1 exactly."""
    if len(s) != grid.nodes.size:
        raise ValueError("state length does not match the grid")
    if np.any(s.v1 < 0) or np.any(s.v2 < 0):
        raise ValueError("apply_T needs a nonnegative state")
    if not s.allfinite():
        raise ValueError("apply_T needs a finite state")
    v1m = 0.5 * (s.v1[:-1] + s.v1[1:])
    v2m = 0.5 * (s.v2[:-1] + s.v2[1:])
    t1 = component(p.lam, p.N, grid, _checked(p.f, s.v2), _checked(p.f, v2m))
    t2 = component(p.lam, p.N, grid, _checked(p.g, s.v1), _checked(p.g, v1m))
    return StatePair(t1, t2)


def fixed_point_residual(p: ProblemSpec, grid: RadialGrid, s: StatePair) -> float:
    """Sup-norm of T(s) - s, taken as the max over both components."""
    t = apply_T(p, grid, s.clamped())
    return float(max(np.max(np.abs(t.v1 - s.v1)), np.max(np.abs(t.v2 - s.v2))))


# -- constants and lemma quantities ---------------------------------------------------


@functools.lru_cache(maxsize=None)
def gamma_constant(N: int, tol: float = 1e-13) -> float:
    """(1/4) int_{1/4}^{3/4} (s^N - 4^-N)^(1/N) ds by adaptive Simpson."""
    if int(N) != N or N < 1:
        raise ValueError("N must be an integer >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    a = 0.25 ** N

    def integrand(s):
        return max(s ** N - a, 0.0) ** (1.0 / N)

    return 0.25 * adaptive_simpson(integrand, 0.25, 0.75, 4.0 * tol)


@dataclass(frozen=True)
class ConeReport:
    member: bool
    worst_margin: float
    concavity_margin: float
    interval_margin: tuple = ()
    nonneg_margin: tuple = ()


def cone_check(s: StatePair, grid: RadialGrid, tol: float = CONE_TOL,
               quarter: float = QUARTER, interval: tuple = CONE_INTERVAL) -> ConeReport:
    """Margins of the cone inequalities and of the concavity bound v >= min(t, 1-t)||v||."""
    if len(s) != grid.nodes.size:
        raise ValueError("state length does not match the grid")
    t = grid.nodes
    inside = (t >= interval[0] - 1e-14) & (t <= interval[1] + 1e-14)
    interval_margin, nonneg_margin, concavity = [], [], []
    for v in (s.v1, s.v2):
        sup = float(np.max(np.abs(v)))
        nonneg_margin.append(float(np.min(v)))
        interval_margin.append(float(np.min(v[inside]) - quarter * sup))
        concavity.append(float(np.min(v - np.minimum(t, 1.0 - t) * sup)))
    worst = min(min(interval_margin), min(nonneg_margin))
    return ConeReport(worst >= -tol, worst, min(concavity), tuple(interval_margin), tuple(nonneg_margin))


def _grid_extreme(values_fn, lo, hi, resolution, sense):
    xs = np.linspace(lo, hi, resolution + 1)
    with np.errstate(all="ignore"):
        ys = np.asarray(values_fn(xs), dtype=float)
    if not np.all(np.isfinite(ys)) or np.any(ys < 0):
        raise NonlinearityError("nonlinearity produced an invalid value in weak_bounds")
    sign = 1.0 if sense == "max" else -1.0
    k = int(np.argmax(sign * ys))
    best = float(ys[k])
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, resolution)]
    refined = sign * _golden_max(lambda x: sign * float(values_fn(x)), a, b)
    return max(best, refined) if sense == "max" else min(best, refined)


@dataclass(frozen=True)
class WeakBounds:
    m_hat: float
    M_hat: float
    lower: float
    upper: float


def weak_bounds(p: ProblemSpec, r: float, resolution: int = 512) -> WeakBounds:
    """Shell estimates: m_hat on [r/8, r], M_hat on [0, r] and the two norm bounds."""
    if not r > 0:
        raise ValueError("r must be positive")
    for x in (r / 8.0, r):
        nl_eval(p.f, x), nl_eval(p.g, x)
    m_hat = _grid_extreme(lambda x: np.minimum(p.f(x), p.g(x)), r / 8.0, r, resolution, "min")
    M_hat = _grid_extreme(lambda x: p.f(x) + p.g(x), 0.0, r, resolution, "max")
    scale = p.lam ** (1.0 / p.N)
    lower = 4.0 * scale * gamma_constant(p.N) * m_hat ** (1.0 / p.N)
    upper = 2.0 * scale * M_hat ** (1.0 / p.N)
    return WeakBounds(m_hat, M_hat, lower, upper)


def default_grid(M: Optional[int] = None) -> RadialGrid:
    return RadialGrid.uniform(DEFAULT_INTERVALS if M is None else M)
