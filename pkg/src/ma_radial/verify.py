"""Randomized property suites behind ``ma-radial verify``.

Every property reports its worst margin: the smallest value of
``tolerance - violation`` over all trials, so a property passes iff its
margin is nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nonlinearity as nlmod
from .operator import (
    ProblemSpec,
    RadialGrid,
    StatePair,
    apply_T,
    cone_check,
    default_grid,
    fixed_point_residual,
    pair_distance,
    weak_bounds,
)
from .solver import SolverConfig, boundary_shoot, forward_integrate, picard_solve, shell_seed

SUITES = ("lemmas", "operator", "oracle")


@dataclass
class PropertyResult:
    name: str
    tolerance: float
    trials: int = 0
    failures: int = 0
    worst_margin: float = np.inf
    worst_case: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.failures == 0

    def record(self, violation: float, tolerance: float = None, **case):
        tol = self.tolerance if tolerance is None else tolerance
        margin = tol - violation if np.isfinite(violation) else -np.inf
        self.trials += 1
        if margin < 0:
            self.failures += 1
        if margin < self.worst_margin:
            self.worst_margin = float(margin)
            self.worst_case = case

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} trials={self.trials:<4} failures={self.failures:<3} "
                f"worst margin={self.worst_margin:.3e}")

    def to_json(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "trials": self.trials,
            "failures": self.failures,
            "tolerance": self.tolerance,
            "worst_margin": self.worst_margin,
            "worst_case": self.worst_case,
        }


# -- random inputs -----------------------------------------------------------------

SMOOTH_FAMILIES = ("power", "constant", "linear", "ratio_bump", "exp_minus_one")


def random_nonlinearity(rng: np.random.Generator, families=SMOOTH_FAMILIES) -> nlmod.Nonlinearity:
    name = families[rng.integers(len(families))]
    if name == "power":
        return nlmod.power(float(rng.uniform(1.0, 3.0)))
    if name == "constant":
        return nlmod.constant(float(rng.uniform(0.5, 2.0)))
    return nlmod.from_family(name)


def random_cone_component(rng: np.random.Generator, r: np.ndarray, amplitude: float) -> np.ndarray:
    """Positive combination of a(1 - r^q), q >= 1; each term lies in the cone."""
    k = rng.integers(1, 4)
    weights = rng.uniform(0.1, 1.0, size=k)
    qs = rng.uniform(1.0, 4.0, size=k)
    v = sum(w * (1.0 - r ** q) for w, q in zip(weights, qs))
    return amplitude * v / np.max(v)


def random_cone_state(rng: np.random.Generator, grid: RadialGrid, norm: float = None) -> StatePair:
    r = grid.nodes
    a1, a2 = rng.uniform(0.0, 1.0, size=2)
    if a1 + a2 == 0:
        a1 = 1.0
    s = StatePair(random_cone_component(rng, r, a1), random_cone_component(rng, r, a2))
    target = float(rng.uniform(0.05, 20.0)) if norm is None else norm
    return s.scaled(target / s.norm())


def random_problem(rng: np.random.Generator, lam_range=(0.1, 10.0), Ns=(1, 2, 3)) -> ProblemSpec:
    N = int(Ns[rng.integers(len(Ns))])
    return ProblemSpec(N, float(rng.uniform(*lam_range)), random_nonlinearity(rng), random_nonlinearity(rng))


# -- suites ---------------------------------------------------------------------------


def cone_preservation(rng, trials, grid=None, tol=1e-9):
    """apply_T maps random cone states into the cone, nonincreasing in r."""
    grid = grid or default_grid()
    cone = PropertyResult("cone preservation", tol)
    mono = PropertyResult("output nonincreasing", tol)
    for _ in range(trials):
        p = random_problem(rng)
        s = random_cone_state(rng, grid)
        out = apply_T(p, grid, s)
        scale = max(1.0, out.norm())
        case = {"N": p.N, "lambda": p.lam, "f": p.f.label, "g": p.g.label, "norm": s.norm()}
        cone.record(-cone_check(out, grid).worst_margin / scale, **case)
        rise = max(float(np.max(np.diff(out.v1))), float(np.max(np.diff(out.v2))), 0.0)
        mono.record(rise / scale, **case)
    return [cone, mono]


def weak_sandwich(rng, trials, grid=None, rel_tol=1e-6):
    """Shell bounds: lower - tol <= ||T s|| <= upper + tol for s in the cone with ||s|| = r."""
    grid = grid or default_grid()
    result = PropertyResult("weak-bound sandwich", rel_tol)
    for _ in range(trials):
        p = random_problem(rng)
        r = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        s = random_cone_state(rng, grid, norm=r)
        wb = weak_bounds(p, r)
        norm = apply_T(p, grid, s).norm()
        scale = max(1.0, wb.upper)
        violation = max(wb.lower - norm, norm - wb.upper, 0.0) / scale
        result.record(violation, N=p.N, **{"lambda": p.lam}, r=r, f=p.f.label, g=p.g.label,
                      lower=wb.lower, norm=norm, upper=wb.upper)
    return [result]


def lemmas_suite(rng, trials, grid=None):
    return cone_preservation(rng, trials, grid) + weak_sandwich(rng, trials, grid)


def quadrature_order(rng, trials, coarse=256, tol_ratio=0.3):
    """Self-convergence ratio ||T_4M - T_2M|| / ||T_2M - T_M|| on smooth inputs."""
    grids = [RadialGrid.uniform(m) for m in (coarse, 2 * coarse, 4 * coarse)]
    result = PropertyResult("quadrature order ratio", tol_ratio)
    for _ in range(trials):
        p = random_problem(rng)
        ks = rng.integers(1, 4, size=2)
        qs = rng.uniform(1.0, 3.0, size=2)
        amp = rng.uniform(0.2, 5.0, size=2)
        outs = []
        for grid in grids:
            r = grid.nodes
            s = StatePair(amp[0] * (1.0 - r ** (2 * ks[0])) , amp[1] * np.cos(0.5 * np.pi * r ** qs[1]))
            outs.append(apply_T(p, grid, s))
        # compare on the coarse nodes (shared by all three grids)
        pick = [slice(None, None, 1), slice(None, None, 2), slice(None, None, 4)]
        v = [np.concatenate([o.v1[k], o.v2[k]]) for o, k in zip(outs, pick)]
        d1 = float(np.max(np.abs(v[1] - v[0])))
        d2 = float(np.max(np.abs(v[2] - v[1])))
        ratio = d2 / d1 if d1 > 1e-13 * max(1.0, outs[0].norm()) else 0.0
        result.record(ratio, N=p.N, **{"lambda": p.lam}, f=p.f.label, g=p.g.label, ratio=ratio)
    return result


def operator_suite(rng, trials, grid=None):
    grid = grid or default_grid()
    terminal = PropertyResult("terminal value T(s)(1) = 0", 0.0)
    homog = PropertyResult("lambda scaling c^N -> c", 1e-12)
    swap = PropertyResult("(f, g) swap symmetry", 1e-13)
    for _ in range(trials):
        p = random_problem(rng)
        s = random_cone_state(rng, grid)
        out = apply_T(p, grid, s)
        case = {"N": p.N, "lambda": p.lam, "f": p.f.label, "g": p.g.label}
        terminal.record(max(abs(out.v1[-1]), abs(out.v2[-1])), **case)
        c = float(rng.uniform(0.2, 5.0))
        scaled = apply_T(p.with_lambda(p.lam * c ** p.N), grid, s)
        homog.record(pair_distance(scaled, out.scaled(c)) / max(1.0, c * out.norm()), c=c, **case)
        q = ProblemSpec(p.N, p.lam, p.g, p.f)
        mirrored = apply_T(q, grid, StatePair(s.v2, s.v1))
        swap.record(pair_distance(mirrored, StatePair(out.v2, out.v1)) / max(1.0, out.norm()), **case)
    return [terminal, homog, swap, quadrature_order(rng, max(1, min(trials, 10)))]


def oracle_suite(rng, trials, grid=None, cfg=None):
    """Picard and shooting agree on random problems with a unique solution.

    Sublinear powers f = x^p, p < N (plus positive constants) have f0 = inf
    and f_inf = 0, so a single Picard-stable solution exists for every lambda.
    """
    grid = grid or default_grid()
    cfg = cfg or SolverConfig(shoot_seeds=6)
    agree = PropertyResult("picard vs shoot", 0.0)
    reproduce = PropertyResult("forward_integrate reproduces", 0.0)
    residual = PropertyResult("shoot fixed-point residual", 1e-6)
    h2 = grid.spacing ** 2
    for _ in range(trials):
        N = int(rng.integers(1, 3))
        pick = lambda: (nlmod.power(float(rng.uniform(0.3, 0.9 * N))) if rng.random() < 0.7
                        else nlmod.constant(float(rng.uniform(0.5, 2.0))))
        p = ProblemSpec(N, float(rng.uniform(0.1, 10.0)), pick(), pick())
        case = {"N": N, "lambda": p.lam, "f": p.f.label, "g": p.g.label}
        rep = picard_solve(p, grid, shell_seed(grid, 1.0), cfg)
        shot = [s for s in boundary_shoot(p, cfg=cfg, grid=grid) if not s.trivial]
        tol = max(1e-7, h2) * max(1.0, rep.norm)
        if not rep.converged or not shot:
            agree.record(np.inf, tol, **case, note="no solution from one method")
            continue
        best = min(pair_distance(rep.state, s.state) for s in shot)
        agree.record(best, tol, **case)
        fwd = forward_integrate(p, *rep.alpha, grid=grid)
        reproduce.record(pair_distance(fwd.state, rep.state), tol, **case)
        for s in shot:
            residual.record(fixed_point_residual(p, grid, s.state) / max(1.0, s.norm), **case)
    return [agree, reproduce, residual]


def run_suite(name: str, trials: int, seed: int = 0, grid=None):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    if int(trials) != trials or trials < 1:
        raise ValueError("trials must be a positive integer")
    rng = np.random.default_rng(seed)
    runner = {"lemmas": lemmas_suite, "operator": operator_suite, "oracle": oracle_suite}[name]
    return runner(rng, int(trials), grid)
