"""Fixed points of the discrete operator and the forward-integration oracle.

Two independent routes to the same discrete solutions:

* ``picard_solve`` / ``multi_start`` iterate the integral operator. Stable
  fixed points are reached by damped Picard iteration; unstable ones (the
  small solution of a superlinear problem, for instance) are located on norm
  shells: the shell-normalized iteration converges to a state ``s`` with
  ``T(s) = kappa * s`` and ``||s|| = rho``, and a root of ``kappa(rho) = 1``
  is a fixed point.
* ``forward_integrate`` / ``boundary_shoot`` march the Volterra form from
  r = 0 with center values alpha and solve ``v(1; alpha) = 0`` by Newton.

The march uses the same interval rule as :func:`operator.apply_T`, so a
shooting root is a fixed point of the discrete operator up to roundoff and
the two routes can be compared far below the discretization error. The
trapezoid march is kept for discretization cross-checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .nonlinearity import NonlinearityError
from .operator import (
    ProblemSpec,
    RadialGrid,
    StatePair,
    _root,
    _weights,
    apply_T,
    cone_check,
    default_grid,
    fixed_point_residual,
    pair_distance,
)

log = logging.getLogger(__name__)

SCHEMES = ("simpson", "trapezoid")
ORACLE_C = 1.0


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-8
    max_iter: int = 500
    damping: float = 1.0
    seed_radii: tuple = (0.25, 1.0, 8.0, 32.0)
    dedupe_tol: float = 1e-4
    # shell scan used by multi_start to reach unstable fixed points
    shell_radii: tuple = tuple(np.geomspace(1e-4, 1e4, 49).tolist())
    shell_tol: float = 1e-13
    # shooting
    alpha_box: tuple = ((1e-3, 1e3), (1e-3, 1e3))
    shoot_seeds: int = 16
    shoot_intervals: int = 128
    shoot_tol: float = 1e-11
    max_newton: int = 60
    degenerate_rcond: float = 1e-5
    blowup: float = 1e100

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        radii = tuple(float(r) for r in self.seed_radii)
        if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("seed_radii must be positive and strictly increasing")
        object.__setattr__(self, "seed_radii", radii)
        object.__setattr__(self, "shell_radii", tuple(float(r) for r in self.shell_radii))
        box = tuple(tuple(float(x) for x in side) for side in self.alpha_box)
        if len(box) != 2 or any(len(s) != 2 or s[0] < 0 or s[1] <= s[0] for s in box):
            raise ValueError("alpha_box must be two increasing intervals in [0, inf)")
        object.__setattr__(self, "alpha_box", box)
        if not self.dedupe_tol > 0:
            raise ValueError("dedupe_tol must be positive")

    def oracle_tol(self, grid: RadialGrid, scale: float = 1.0) -> float:
        """Tolerance for reproducing a fixed point by forward integration."""
        return max(10.0 * self.tol_residual, ORACLE_C * grid.spacing ** 2) * max(1.0, scale)

    def same(self, a: StatePair, b: StatePair) -> bool:
        return pair_distance(a, b) <= self.dedupe_tol * max(1.0, a.norm(), b.norm())


@dataclass
class SolveReport:
    state: StatePair
    residual_fixed_point: float
    residual_oracle: float
    norm: float
    iterations: int
    converged: bool
    trivial: bool
    method: str = "picard"
    half_trivial: bool = False
    degenerate: bool = False
    note: str = ""

    @property
    def alpha(self) -> tuple:
        return self.state.center

    def summary(self) -> dict:
        return {
            "norm": self.norm,
            "alpha": list(self.alpha),
            "residual_fixed_point": self.residual_fixed_point,
            "residual_oracle": self.residual_oracle,
            "iterations": self.iterations,
            "converged": self.converged,
            "trivial": self.trivial,
            "half_trivial": self.half_trivial,
            "method": self.method,
            "note": self.note,
        }


class SolutionSet(list):
    """Solutions sorted by norm, plus per-seed bookkeeping."""

    def __init__(self, reports=(), attempts=None, degenerate=False):
        super().__init__(sorted(reports, key=lambda rep: rep.norm))
        self.attempts = list(attempts or [])
        self.degenerate = degenerate

    @property
    def norms(self):
        return [rep.norm for rep in self]


# -- forward integration ------------------------------------------------------------


def march(p: ProblemSpec, alphas, grid: RadialGrid, scheme: str = "simpson",
          inner_tol: float = 1e-15, max_inner: int = 60):
    """Batched Volterra march from center values ``alphas`` (shape (B, 2)).

    Returns ``(v, ends)`` with ``v`` of shape (B, 2, M+1). Trajectories are
    not clamped, but the nonlinearities only ever see ``max(v, 0)``.
    Non-finite trajectories come back as nan/inf rather than raising.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    B = alphas.shape[0]
    N, lam = p.N, p.lam
    t, h, tm = grid.nodes, grid.h, grid.mid
    w, wm = _weights(N, t), _weights(N, tm)
    M = h.size

    def values(nl, x):
        y = nl(x)
        return y if np.shape(y) == x.shape else np.broadcast_to(y, x.shape)

    def nonlin(c):
        # column 0 drives v1 through f(v2), column 1 drives v2 through g(v1)
        out = np.empty_like(c)
        out[:, 0] = values(p.f, c[:, 1])
        out[:, 1] = values(p.g, c[:, 0])
        return out

    v = np.empty((B, 2, M + 1))
    v[:, :, 0] = alphas
    x_prev = alphas.copy()
    I = np.zeros((B, 2))
    D = np.zeros((B, 2))
    D_prev = D
    with np.errstate(all="ignore"):
        F_prev = nonlin(np.maximum(x_prev, 0.0))
        for j in range(M):
            hj = h[j]
            phi0 = w[j] * F_prev
            c0 = np.maximum(x_prev, 0.0)
            x = x_prev - hj * (1.5 * D - 0.5 * D_prev)
            for _ in range(max_inner):
                c1 = np.maximum(x, 0.0)
                F1 = nonlin(c1)
                phi1 = w[j + 1] * F1
                if scheme == "simpson":
                    phim = wm[j] * nonlin(0.5 * (c0 + c1))
                    full = hj * (phi0 + 4.0 * phim + phi1) / 6.0
                    half = hj * (5.0 * phi0 + 8.0 * phim - phi1) / 24.0
                    I1 = I + full
                    D1 = _root(lam * I1, N)
                    Dm = _root(lam * (I + half), N)
                    x_new = x_prev - hj * (D + 4.0 * Dm + D1) / 6.0
                else:
                    I1 = I + 0.5 * hj * (phi0 + phi1)
                    D1 = _root(lam * I1, N)
                    x_new = x_prev - 0.5 * hj * (D + D1)
                delta = np.abs(x_new - x)
                x = x_new
                if not np.any(delta > inner_tol * (1.0 + np.abs(x))):
                    break
            # final consistent update with the converged x
            c1 = np.maximum(x, 0.0)
            F_prev = nonlin(c1)
            D_prev, D, I = D, D1, I1
            x_prev = x
            v[:, :, j + 1] = x
    return v, v[:, :, -1].copy()


@dataclass
class ForwardResult:
    state: StatePair
    end1: float
    end2: float
    crossings: tuple = (None, None)

    def __iter__(self):
        return iter((self.state, self.end1, self.end2))


def forward_integrate(p: ProblemSpec, alpha1: float, alpha2: float, grid: Optional[RadialGrid] = None,
                      scheme: str = "simpson") -> ForwardResult:
    """March the derivative form from r = 0 with v_i(0) = alpha_i.

    The returned state is clamped at 0; ``end1``/``end2`` are the unclamped
    values at r = 1 and ``crossings`` the first radius where each component
    went negative (None if it never did).
    """
    grid = grid or default_grid()
    if not (alpha1 >= 0 and alpha2 >= 0):
        raise ValueError("center values must be nonnegative")
    v, ends = march(p, [[alpha1, alpha2]], grid, scheme)
    v = v[0]
    if not np.all(np.isfinite(v)):
        raise NonlinearityError("non-finite integrand during forward integration")
    crossings = []
    for comp in v:
        below = np.flatnonzero(comp < 0)
        crossings.append(float(grid.nodes[below[0]]) if below.size else None)
    state = StatePair(np.maximum(v[0], 0.0), np.maximum(v[1], 0.0))
    return ForwardResult(state, float(ends[0, 0]), float(ends[0, 1]), tuple(crossings))


def oracle_discrepancy(p: ProblemSpec, grid: RadialGrid, s: StatePair) -> float:
    """Sup distance between ``s`` and the march started from its own center."""
    a1, a2 = s.center
    if not (np.isfinite(a1) and np.isfinite(a2)):
        return math.inf
    try:
        traj = forward_integrate(p, max(a1, 0.0), max(a2, 0.0), grid).state
    except NonlinearityError:
        return math.inf
    return float(max(np.max(np.abs(traj.v1 - s.v1)), np.max(np.abs(traj.v2 - s.v2))))


# -- reports ------------------------------------------------------------------------


def _finish(p, grid, state, cfg, iterations, method, note="", residual=None, oracle=None):
    if residual is None:
        residual = fixed_point_residual(p, grid, state) if state.allfinite() else math.inf
    norm = state.norm() if state.allfinite() else math.inf
    trivial = norm < cfg.dedupe_tol
    if oracle is None:
        oracle = oracle_discrepancy(p, grid, state) if math.isfinite(norm) else math.inf
    half = (not trivial) and min(np.max(np.abs(state.v1)), np.max(np.abs(state.v2))) < cfg.dedupe_tol
    return SolveReport(state, residual, oracle, norm, iterations, residual <= cfg.tol_residual,
                       trivial, method, bool(half), False, note)


# -- shell-normalized iteration -----------------------------------------------------------------


def shell_seed(grid: RadialGrid, rho: float) -> StatePair:
    """The in-cone seed v1 = v2 = (rho/2)(1 - t), which has pair norm rho."""
    v = 0.5 * rho * (1.0 - grid.nodes)
    return StatePair(v, v.copy())


def shell_gain(p: ProblemSpec, grid: RadialGrid, rho: float, start: Optional[StatePair] = None,
               tol: float = 1e-13, max_iter: int = 400):
    """Converge ``s <- rho * normalize(T(s))`` on the shell ||s|| = rho.

    Returns ``(kappa, state, iterations)`` with ``T(state) ~ kappa * state``.
    After 40 sweeps without convergence the update is averaged with the
    current state, which breaks the period-two cycling of cross-coupled pairs.
    """
    s = shell_seed(grid, rho) if start is None else start.clamped()
    n = s.norm()
    s = shell_seed(grid, rho) if n == 0 else s.scaled(rho / n)
    weight = 1.0
    kappa = math.nan
    for it in range(1, max_iter + 1):
        Ts = apply_T(p, grid, s)
        nT = Ts.norm()
        if not math.isfinite(nT):
            return math.nan, s, it
        if nT == 0.0:
            return 0.0, s, it
        kappa = nT / rho
        new = Ts.scaled(rho / nT)
        if weight < 1.0:
            new = new.scaled(weight) + s.scaled(1.0 - weight)
            new = new.scaled(rho / new.norm())
        change = pair_distance(new, s)
        s = new
        if change <= tol * rho:
            break
        if it == 40:
            weight = 0.5
    return kappa, s, it


def _shell_root(p, grid, lo, hi, s_lo, cfg):
    """Locate kappa(rho) = 1 inside the shell bracket [lo, hi]."""
    cache = {"state": s_lo, "evals": 0}

    def fun(log_rho):
        rho = math.exp(log_rho)
        kappa, s, it = shell_gain(p, grid, rho, cache["state"], tol=cfg.shell_tol)
        cache["state"] = s
        cache["evals"] += it
        return math.log(kappa) if kappa > 0 else -math.inf

    try:
        log_rho = brentq(fun, math.log(lo), math.log(hi), xtol=1e-15, rtol=1e-15, maxiter=200)
    except (ValueError, RuntimeError, NonlinearityError) as exc:
        log.debug("shell root failed on [%g, %g]: %s", lo, hi, exc)
        return None, cache["evals"]
    rho = math.exp(log_rho)
    kappa, s, it = shell_gain(p, grid, rho, cache["state"], tol=cfg.shell_tol)
    return s, cache["evals"] + it


def _kappa_or_nan(p, grid, rho, start=None, tol=1e-12):
    try:
        kappa, s, it = shell_gain(p, grid, rho, start, tol=tol)
    except (NonlinearityError, FloatingPointError, ValueError):
        return math.nan, None, 0
    return kappa, s, it


def shell_search(p: ProblemSpec, grid: RadialGrid, rho0: float, cfg: SolverConfig,
                 factor: float = 2.0, steps: int = 24) -> Optional[SolveReport]:
    """Nearest shell fixed point to ||s|| = rho0, searched geometrically both ways."""
    k0, s0, used = _kappa_or_nan(p, grid, rho0)
    if not math.isfinite(k0) or k0 <= 0:
        return None
    if abs(k0 - 1.0) * rho0 <= cfg.tol_residual:
        return _finish(p, grid, s0, cfg, used, "shell")
    sign0 = k0 > 1.0
    frontier = {+1: (rho0, s0), -1: (rho0, s0)}
    alive = {+1: True, -1: True}
    for _ in range(steps):
        for direction in (+1, -1):
            if not alive[direction]:
                continue
            rho_prev, s_prev = frontier[direction]
            rho = rho_prev * factor ** direction
            k, s, it = _kappa_or_nan(p, grid, rho, s_prev)
            used += it
            if not math.isfinite(k) or k <= 0:
                alive[direction] = False
                continue
            if (k > 1.0) != sign0:
                lo, hi = sorted((rho_prev, rho))
                start = s_prev if rho_prev == lo else s
                state, evals = _shell_root(p, grid, lo, hi, start, cfg)
                used += evals
                if state is None:
                    return None
                return _finish(p, grid, state, cfg, used, "shell")
            frontier[direction] = (rho, s)
        if not any(alive.values()):
            break
    return None


# -- Picard ------------------------------------------------------------------------------


def picard_solve(p: ProblemSpec, grid: RadialGrid, initial: StatePair, cfg: SolverConfig = SolverConfig(),
                 fallback: bool = True) -> SolveReport:
    """Damped Picard iteration ``s <- (1 - d) s + d T(s)`` on the clamped iterate.

    The damping drops to 0.5 the first time the residual grows. If the
    iteration diverges, stalls, or collapses to the trivial solution from a
    nontrivial start, the nearest shell fixed point around the initial norm is
    returned instead (``fallback=False`` disables this).
    """
    if len(initial) != grid.nodes.size:
        raise ValueError("initial state does not match the grid")
    s = initial.clamped()
    damping = cfg.damping
    best = (math.inf, s, 0)
    prev = math.inf
    note = ""
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        try:
            Ts = apply_T(p, grid, s)
        except NonlinearityError:
            note = "diverged"
            break
        if not Ts.allfinite() or Ts.norm() > cfg.blowup:
            note = "diverged"
            break
        res = float(max(np.max(np.abs(Ts.v1 - s.v1)), np.max(np.abs(Ts.v2 - s.v2))))
        if res < best[0]:
            best = (res, s, iterations)
        if res <= cfg.tol_residual:
            break
        if res > prev and damping > 0.5:
            damping = 0.5
        prev = res
        s = (s.scaled(1.0 - damping) + Ts.scaled(damping)).clamped() if damping < 1.0 else Ts
    else:
        note = "max_iter"
    res, state, _ = best
    report = _finish(p, grid, state, cfg, iterations, "picard", note, residual=res if res < math.inf else None)
    if fallback and initial.norm() >= cfg.dedupe_tol and (not report.converged or report.trivial):
        shell = shell_search(p, grid, initial.norm(), cfg)
        if shell is not None and shell.converged and not shell.trivial:
            shell.iterations += iterations
            shell.method = "picard+shell"
            return shell
    return report


# -- shooting ---------------------------------------------------------------------------------


def _seed_axis(lo, hi, n):
    if lo > 0 and hi / lo > 10.0:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _fd_jacobian(p, grid, alphas, F):
    B = alphas.shape[0]
    steps = 1e-7 * np.maximum(alphas, 1e-4)
    pert = np.concatenate([alphas + np.column_stack([steps[:, 0], np.zeros(B)]),
                           alphas + np.column_stack([np.zeros(B), steps[:, 1]])])
    _, ends = march(p, pert, grid)
    J = np.empty((B, 2, 2))
    J[:, :, 0] = (ends[:B] - F) / steps[:, [0]]
    J[:, :, 1] = (ends[B:] - F) / steps[:, [1]]
    return J


def _newton(p, grid, alphas, cfg, max_iter=None):
    """Damped Newton on alpha -> v(1; alpha); returns (alphas, F, converged, iters, status)."""
    alphas = np.array(alphas, dtype=float)
    B = alphas.shape[0]
    max_iter = cfg.max_newton if max_iter is None else max_iter
    _, F = march(p, alphas, grid)
    alive = np.all(np.isfinite(F), axis=1)
    status = np.where(alive, "", "non-finite start").astype(object)
    step = np.ones(B)
    iters = np.zeros(B, dtype=int)

    def done(a, f):
        return np.max(np.abs(f), axis=1) <= cfg.shoot_tol * np.maximum(1.0, np.max(a, axis=1))

    conv = alive & done(alphas, F)
    for _ in range(max_iter):
        active = np.flatnonzero(alive & ~conv)
        if active.size == 0:
            break
        a, f = alphas[active], F[active]
        J = _fd_jacobian(p, grid, a, f)
        scale = np.max(np.abs(J), axis=(1, 2))
        with np.errstate(all="ignore"):
            det = np.linalg.det(J / np.maximum(scale, 1e-300)[:, None, None])
        singular = ~np.isfinite(det) | ~np.isfinite(scale) | (np.abs(det) <= 1e-14)
        if np.any(singular):
            alive[active[singular]] = False
            status[active[singular]] = "singular jacobian"
        ok = ~singular
        active, a, f, J = active[ok], a[ok], f[ok], J[ok]
        if active.size == 0:
            continue
        delta = -np.linalg.solve(J, f[:, :, None])[:, :, 0]
        trial = np.maximum(a + step[active, None] * delta, 0.0)
        trial = np.minimum(trial, 10.0 * a + 1.0)
        _, ft = march(p, trial, grid)
        iters[active] += 1
        nf = np.max(np.abs(f), axis=1)
        nt = np.max(np.abs(ft), axis=1)
        good = np.all(np.isfinite(ft), axis=1) & (nt < nf)
        acc = active[good]
        alphas[acc], F[acc] = trial[good], ft[good]
        step[acc] = np.minimum(1.0, 2.0 * step[acc])
        rej = active[~good]
        step[rej] *= 0.25
        stalled = rej[step[rej] < 1e-8]
        alive[stalled] = False
        status[stalled] = "stalled"
        conv = alive & done(alphas, F)
    status[alive & ~conv & (status == "")] = "max_iter"
    return alphas, F, conv, iters, status


def boundary_jacobian(p: ProblemSpec, grid: RadialGrid, alpha) -> np.ndarray:
    """Jacobian of the boundary map near ``alpha``.

    Zero components are lifted slightly into the open quadrant; at alpha = 0
    the clamp would otherwise make the one-sided differences meaningless.
    """
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    floor = 1e-6 * max(1.0, float(np.max(alpha)))
    alpha = np.where(alpha < floor, floor, alpha)
    _, F = march(p, alpha, grid)
    return _fd_jacobian(p, grid, alpha, F)[0]


def _rcond(J):
    sv = np.linalg.svd(J, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


def boundary_shoot(p: ProblemSpec, alpha_box=None, cfg: SolverConfig = SolverConfig(),
                   grid: Optional[RadialGrid] = None) -> SolutionSet:
    """All roots of the boundary map found from a seeds x seeds lattice in ``alpha_box``.

    Newton runs on a coarse radial grid, distinct roots are polished on
    ``grid`` and packaged as reports (trivial roots included, flagged).
    """
    grid = grid or default_grid()
    box = cfg.alpha_box if alpha_box is None else tuple(tuple(side) for side in alpha_box)
    if any(side[0] < 0 or side[1] < side[0] for side in box):
        raise ValueError("alpha_box must lie in the nonnegative quadrant")
    coarse = RadialGrid.uniform(cfg.shoot_intervals) if cfg.shoot_intervals < grid.M else grid
    ax1 = _seed_axis(box[0][0], box[0][1], cfg.shoot_seeds)
    ax2 = _seed_axis(box[1][0], box[1][1], cfg.shoot_seeds)
    seeds = np.array([(a, b) for a in ax1 for b in ax2])
    alphas, F, conv, iters, status = _newton(p, coarse, seeds, cfg)
    attempts = [{"seed": seeds[k].tolist(), "status": "converged" if conv[k] else status[k]}
                for k in range(len(seeds))]
    roots = []
    for k in np.flatnonzero(conv):
        a = alphas[k]
        if not any(np.max(np.abs(a - b)) <= 1e-6 * max(1.0, np.max(np.abs(b))) for b, _ in roots):
            roots.append((a, int(iters[k])))
    if not roots:
        return SolutionSet([], attempts)
    fine_alphas, fine_F, fine_conv, fine_iters, _ = _newton(p, grid, np.array([a for a, _ in roots]), cfg)
    reports = []
    degenerate = False
    for k, (a0, it0) in enumerate(roots):
        if not fine_conv[k]:
            continue
        a = fine_alphas[k]
        v, ends = march(p, a[None, :], grid)
        state = StatePair(np.maximum(v[0, 0], 0.0), np.maximum(v[0, 1], 0.0))
        rep = _finish(p, grid, state, cfg, it0 + int(fine_iters[k]), "shoot",
                      oracle=float(np.max(np.abs(ends))))
        J = boundary_jacobian(p, grid, a)
        if _rcond(J) < cfg.degenerate_rcond:
            rep.degenerate = True
            rep.note = "singular boundary map"
            degenerate = True
        if any(cfg.same(rep.state, other.state) for other in reports):
            continue
        reports.append(rep)
    return SolutionSet(reports, attempts, degenerate)


# -- multi-start ------------------------------------------------------------------------------


def _validated(p, grid, rep, cfg):
    if not rep.converged or rep.trivial:
        return False
    if rep.residual_oracle > cfg.oracle_tol(grid, rep.norm):
        log.info("candidate with norm %g failed oracle check (%g)", rep.norm, rep.residual_oracle)
        return False
    return cone_check(rep.state, grid).member


def shell_scan(p: ProblemSpec, grid: RadialGrid, radii, cfg: SolverConfig):
    """kappa(rho) on each shell; returns (radii, kappas, states)."""
    kappas, states = [], []
    prev = None
    for rho in radii:
        k, s, _ = _kappa_or_nan(p, grid, rho, prev)
        kappas.append(k)
        states.append(s)
        prev = s if s is not None else None
    return np.asarray(radii, dtype=float), np.asarray(kappas), states


def multi_start(p: ProblemSpec, grid: Optional[RadialGrid] = None, cfg: SolverConfig = SolverConfig()) -> SolutionSet:
    """Nontrivial, oracle-validated solutions from Picard seeds and a shell scan."""
    grid = grid or default_grid()
    if not cfg.seed_radii:
        raise ValueError("seed_radii must be nonempty")
    candidates, attempts = [], []
    for r in cfg.seed_radii:
        rep = picard_solve(p, grid, shell_seed(grid, r), cfg)
        attempts.append({"seed_radius": r, "method": rep.method, "converged": rep.converged,
                         "trivial": rep.trivial, "norm": rep.norm, "note": rep.note})
        candidates.append(rep)

    radii = sorted(set(cfg.shell_radii) | set(cfg.seed_radii))
    radii, kappas, states = shell_scan(p, grid, radii, cfg)
    gap = np.abs(kappas - 1.0)
    degenerate = bool(np.sum(gap < 1e-6) >= 3)
    for k in range(len(radii) - 1):
        k0, k1 = kappas[k], kappas[k + 1]
        if not (np.isfinite(k0) and np.isfinite(k1) and k0 > 0 and k1 > 0):
            continue
        if (k0 > 1.0) == (k1 > 1.0):
            continue
        state, used = _shell_root(p, grid, radii[k], radii[k + 1], states[k], cfg)
        if state is None:
            attempts.append({"shell": [radii[k], radii[k + 1]], "converged": False})
            continue
        rep = _finish(p, grid, state, cfg, used, "shell")
        attempts.append({"shell": [radii[k], radii[k + 1]], "converged": rep.converged, "norm": rep.norm})
        candidates.append(rep)

    accepted = []
    for rep in sorted(candidates, key=lambda r: r.residual_fixed_point):
        if not _validated(p, grid, rep, cfg):
            continue
        if any(cfg.same(rep.state, other.state) for other in accepted):
            continue
        accepted.append(rep)
    return SolutionSet(accepted, attempts, degenerate)


def with_overrides(cfg: SolverConfig, **kwargs) -> SolverConfig:
    return replace(cfg, **kwargs)
