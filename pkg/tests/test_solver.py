import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ma_radial import nonlinearity as nl
from ma_radial.operator import ProblemSpec, RadialGrid, StatePair, cone_check, fixed_point_residual
from ma_radial.solver import (
    SolverConfig,
    boundary_shoot,
    forward_integrate,
    march,
    multi_start,
    picard_solve,
    shell_seed,
)

from conftest import problem


def _symmetric_square_alpha():
    """Center value of the positive solution of -v'' = v^2, v'(0) = 0, v(1) = 0."""

    def end(a):
        sol = solve_ivp(lambda r, y: [y[1], -max(y[0], 0.0) ** 2], (0, 1), [a, 0.0], rtol=1e-12, atol=1e-12)
        return sol.y[0, -1]

    return brentq(end, 1.0, 10.0, xtol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_residual=0)
    with pytest.raises(ValueError):
        SolverConfig(damping=1.5)
    with pytest.raises(ValueError):
        SolverConfig(seed_radii=(2.0, 1.0))
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    cfg = SolverConfig()
    assert (cfg.tol_residual, cfg.max_iter, cfg.dedupe_tol, cfg.damping) == (1e-8, 500, 1e-4, 1.0)


def test_picard_constant_closed_form(grid):
    p = problem("constant", 2.0, c=1.0)
    rep = picard_solve(p, grid, shell_seed(grid, 5.0))
    assert rep.converged and not rep.trivial and rep.iterations <= 2
    np.testing.assert_allclose(rep.state.v1, 1 - grid.nodes ** 2, atol=1e-10)
    assert rep.norm == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("N, lam, c", [(1, 0.5, 2.0), (2, 3.0, 1.0), (3, 5.0, 0.7)])
def test_constant_center_value(grid, N, lam, c):
    p = problem("constant", lam, N=N, c=c)
    sols = multi_start(p, grid)
    assert len(sols) == 1
    assert sols[0].alpha[0] == pytest.approx((lam * c) ** (1 / N) / 2, rel=1e-9)


def test_picard_trivial(grid):
    rep = picard_solve(problem("linear", 1.0), grid, StatePair.zeros(grid))
    assert rep.trivial and rep.converged and rep.residual_fixed_point == 0.0


def test_picard_square_reaches_unstable_solution(grid):
    rep = picard_solve(problem("power", 1.0, p=2.0), grid, shell_seed(grid, 3.0))
    assert rep.converged and not rep.trivial
    assert rep.residual_oracle <= 1e-6
    assert rep.alpha[0] == pytest.approx(_symmetric_square_alpha(), rel=1e-4)
    assert rep.alpha[0] == pytest.approx(rep.alpha[1], rel=1e-9)


def test_forward_constant_closed_form(grid):
    fwd = forward_integrate(problem("constant", 1.0, c=1.0), 0.5, 0.5, grid)
    np.testing.assert_allclose(fwd.state.v1, 0.5 - grid.nodes ** 2 / 2, atol=1e-14)
    assert abs(fwd.end1) < 1e-14 and abs(fwd.end2) < 1e-14


def test_forward_trivial(grid):
    state, e1, e2 = forward_integrate(problem("linear", 3.0), 0.0, 0.0, grid)
    assert state.norm() == 0.0 and e1 == 0.0 and e2 == 0.0


@pytest.mark.parametrize("scheme", ["simpson", "trapezoid"])
def test_forward_eigenfunction(grid, scheme):
    p = problem("linear", (math.pi / 2) ** 2)
    fwd = forward_integrate(p, 1.0, 1.0, grid, scheme)
    np.testing.assert_allclose(fwd.state.v1, np.cos(math.pi * grid.nodes / 2), atol=10 * grid.spacing ** 2)
    assert abs(fwd.end1) < 10 * grid.spacing ** 2


def test_forward_records_crossing(grid):
    fwd = forward_integrate(problem("linear", 9.0), 1.0, 1.0, grid)
    assert fwd.end1 < 0 and fwd.crossings[0] is not None and 0.5 < fwd.crossings[0] < 0.6
    assert np.all(fwd.state.v1 >= 0)
    with pytest.raises(ValueError):
        forward_integrate(problem("linear", 1.0), -1.0, 0.0, grid)


def test_march_is_batched(grid):
    p = problem("ratio_bump", 50.0)
    alphas = np.array([[0.5, 1.0], [2.0, 3.0], [0.0, 0.0]])
    v, ends = march(p, alphas, grid)
    for k, a in enumerate(alphas):
        single = forward_integrate(p, *a, grid=grid)
        assert ends[k, 0] == pytest.approx(single.end1, abs=1e-14)


def test_shoot_constant(grid):
    sols = boundary_shoot(problem("constant", 2.0, c=1.0), grid=grid)
    nontrivial = [s for s in sols if not s.trivial]
    assert len(nontrivial) == 1
    assert nontrivial[0].alpha == pytest.approx((1.0, 1.0), abs=1e-9)


def test_shoot_linear_below_eigenvalue(grid):
    sols = boundary_shoot(problem("linear", 1.0), grid=grid)
    assert all(s.trivial for s in sols)
    assert not sols.degenerate


def test_shoot_linear_at_eigenvalue_is_degenerate(grid):
    p = problem("linear", 1.0)
    lam = brentq(lambda l: march(p.with_lambda(l), [[1.0, 1.0]], grid)[1][0, 0], 2.3, 2.6, xtol=1e-14)
    assert lam == pytest.approx((math.pi / 2) ** 2, abs=1e-5)
    assert boundary_shoot(p.with_lambda(lam), grid=grid).degenerate
    assert multi_start(p.with_lambda(lam), grid).degenerate


def test_shoot_square_symmetric_root(grid):
    sols = boundary_shoot(problem("power", 1.0, p=2.0), alpha_box=((0.1, 50), (0.1, 50)), grid=grid)
    sym = [s for s in sols if not s.trivial and abs(s.alpha[0] - s.alpha[1]) < 1e-8 * s.alpha[0]]
    assert sym
    assert sym[0].alpha[0] == pytest.approx(_symmetric_square_alpha(), rel=1e-4)
    with pytest.raises(ValueError):
        boundary_shoot(problem("linear", 1.0), alpha_box=((-1, 1), (0, 1)))


def test_multi_start_examples(grid):
    cfg = SolverConfig(seed_radii=(0.5, 1.0, 4.0))
    const = multi_start(problem("constant", 2.0, c=1.0), grid, cfg)
    assert len(const) == 1 and const[0].norm == pytest.approx(2.0, abs=1e-9)
    assert len(multi_start(problem("linear", 1.0), grid, cfg)) == 0


def test_multi_start_two_solutions(grid):
    p = problem("ratio_bump", 600.0)
    sols = multi_start(p, grid)
    assert len(sols) >= 2
    assert min(sols.norms) < 2 < max(sols.norms)
    for a in sols:
        assert a.converged and cone_check(a.state, grid).member
        # discrete concavity: u = -v has nondecreasing derivative
        for v in (a.state.v1, a.state.v2):
            assert np.all(np.diff(v, 2) <= 1e-9 * a.norm)
    for a, b in zip(sols, sols[1:]):
        assert abs(a.norm - b.norm) >= SolverConfig().dedupe_tol


def test_shoot_and_picard_agree(grid):
    p = problem("ratio_bump", 600.0)
    shot = [s for s in boundary_shoot(p, grid=grid) if not s.trivial]
    picard = multi_start(p, grid)
    assert len(shot) == len(picard)
    for a, b in zip(sorted(shot, key=lambda r: r.norm), picard):
        assert a.norm == pytest.approx(b.norm, rel=1e-7)
        assert fixed_point_residual(p, grid, a.state) <= 1e-6 * max(1.0, a.norm)


def test_half_trivial_flag(grid):
    """f(0) > 0 rules out a zero component; with f = x both vanish together."""
    p = ProblemSpec(1, 2.0, nl.constant(1.0), nl.linear())
    rep = picard_solve(p, grid, shell_seed(grid, 1.0))
    assert rep.converged and not rep.half_trivial
    assert rep.state.v1[0] == pytest.approx(1.0, abs=1e-10)
