import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ma_radial import nonlinearity as nl
from ma_radial.nonlinearity import NonlinearityError
from ma_radial.operator import (
    ProblemSpec,
    RadialGrid,
    StatePair,
    apply_T,
    cone_check,
    default_grid,
    fixed_point_residual,
    gamma_constant,
    pair_distance,
    weak_bounds,
)
from ma_radial.quadrature import QuadratureError, adaptive_simpson


def _gamma_mpmath(N):
    mpmath.mp.dps = 30
    a = mpmath.mpf(1) / 4 ** N
    return float(mpmath.quad(lambda s: (s ** N - a) ** (mpmath.mpf(1) / N), [0.25, 0.75]) / 4)


def _gamma_antiderivative_N2():
    a = 0.25

    def F(s):
        root = math.sqrt(max(s * s - a * a, 0.0))
        return s / 2 * root - a * a / 2 * math.log(s + root)

    return 0.25 * (F(0.75) - F(0.25))


def test_gamma_closed_forms():
    assert gamma_constant(1) == pytest.approx(1 / 32, abs=1e-12)
    assert gamma_constant(2) == pytest.approx(_gamma_antiderivative_N2(), abs=1e-10)
    assert gamma_constant(2) == pytest.approx(0.052518, abs=1e-5)


@pytest.mark.parametrize("N", [1, 2, 3, 4, 6])
def test_gamma_against_mpmath(N):
    assert gamma_constant(N) == pytest.approx(_gamma_mpmath(N), abs=1e-11)


def test_gamma_three_golden():
    # the independent quadratures agree on this value
    assert gamma_constant(3) == pytest.approx(0.05825216835692189, abs=1e-11)


def test_gamma_rejects_bad_N():
    with pytest.raises(ValueError):
        gamma_constant(0)


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)
    val, _ = quad(lambda x: math.sqrt(x), 0.0, 1.0)
    assert adaptive_simpson(math.sqrt, 0.0, 1.0) == pytest.approx(val, abs=1e-9)
    assert adaptive_simpson(math.exp, 1.0, 1.0) == 0.0
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda x: 1 / x if x else math.inf, 0.0, 1.0)


# -- grid and state --------------------------------------------------------------


def test_grid_contains_quarters():
    for M in (8, 10, 512, 1000):
        g = RadialGrid.uniform(M)
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
        assert 0.25 in g.nodes and 0.75 in g.nodes
        assert np.all(np.diff(g.nodes) > 0)
    assert RadialGrid.uniform(512).M == 512


@pytest.mark.parametrize("nodes", [[0, 0.5, 1], np.linspace(0.1, 1, 20), np.linspace(0, 1, 20)[::-1]])
def test_grid_validation(nodes):
    with pytest.raises(ValueError):
        RadialGrid(nodes)


def test_state_pair_norm_is_sum_of_sups(grid):
    s = StatePair.from_functions(grid, lambda r: 1 - r ** 2, lambda r: 3 * (1 - r))
    assert s.norm() == pytest.approx(4.0)
    assert s.center == (1.0, 3.0)
    with pytest.raises(ValueError):
        StatePair(np.zeros(3), np.zeros(4))


# -- apply_T --------------------------------------------------------------------------


def test_apply_T_constant_N2(grid):
    p = ProblemSpec(2, 4.0, nl.constant(1.0), nl.constant(1.0))
    s = StatePair(np.full(grid.nodes.size, 0.7), np.full(grid.nodes.size, 0.7))
    out = apply_T(p, grid, s)
    np.testing.assert_allclose(out.v1, 1 - grid.nodes ** 2, atol=1e-13)


def test_apply_T_constant_N1_center(grid):
    p = ProblemSpec(1, 1.0, nl.constant(1.0), nl.constant(1.0))
    out = apply_T(p, grid, StatePair.zeros(grid))
    assert out.v1[0] == pytest.approx(0.5, abs=1e-14)


def test_zero_is_fixed(grid):
    p = ProblemSpec(3, 7.0, nl.power(2.0), nl.linear())
    out = apply_T(p, grid, StatePair.zeros(grid))
    assert out.norm() == 0.0
    assert fixed_point_residual(p, grid, StatePair.zeros(grid)) == 0.0


def test_apply_T_rejects_negative_states(grid):
    p = ProblemSpec(1, 1.0, nl.linear(), nl.linear())
    bad = StatePair(-np.ones(grid.nodes.size), np.ones(grid.nodes.size))
    with pytest.raises(ValueError):
        apply_T(p, grid, bad)


def test_apply_T_rejects_nonfinite_nonlinearity(grid):
    p = ProblemSpec(1, 1.0, nl.parse_expression("1/(x-x)"), nl.linear())
    s = StatePair.from_functions(grid, lambda r: 1 - r)
    with pytest.raises(NonlinearityError):
        apply_T(p, grid, s)


def test_apply_T_against_scipy(grid):
    """Nested integrals by scipy.quad with the exact state."""
    N, lam = 2, 3.0
    p = ProblemSpec(N, lam, nl.ratio_bump(), nl.power(1.5))
    v1 = lambda r: 2 * (1 - r ** 2)
    v2 = lambda r: np.cos(0.5 * np.pi * r)
    s = StatePair.from_functions(grid, v1, v2)
    out = apply_T(p, grid, s)

    def T1(r):
        inner = lambda u: quad(lambda t: N * t ** (N - 1) * p.f(v2(t)), 0, u, epsabs=1e-13)[0]
        return quad(lambda u: (lam * inner(u)) ** (1 / N), r, 1, epsabs=1e-12)[0]

    for r in (0.0, 0.3, 0.75):
        k = int(np.argmin(np.abs(grid.nodes - r)))
        assert out.v1[k] == pytest.approx(T1(grid.nodes[k]), abs=1e-6)


def test_scaling_lambda_scales_output(grid, rng):
    p = ProblemSpec(3, 2.0, nl.exp_minus_one(), nl.ratio_bump())
    s = StatePair.from_functions(grid, lambda r: 1 - r ** 2, lambda r: 2 - 2 * r)
    base = apply_T(p, grid, s)
    for c in rng.uniform(0.1, 10.0, size=5):
        scaled = apply_T(p.with_lambda(p.lam * c ** 3), grid, s)
        assert pair_distance(scaled, base.scaled(c)) <= 1e-12 * c * base.norm()


def test_quadrature_order_on_closed_form():
    """Second order at least: errors drop by >= 4 per halving (state interpolation)."""
    p = ProblemSpec(1, 2.0, nl.linear(), nl.linear())
    errors = []
    for M in (64, 128, 256):
        g = RadialGrid.uniform(M)
        s = StatePair.from_functions(g, lambda r: np.cos(r), lambda r: np.cos(r))
        # T1 = int_r^1 (2 sin u) du = 2 (cos r - cos 1)
        errors.append(np.max(np.abs(apply_T(p, g, s).v1 - 2 * (np.cos(g.nodes) - np.cos(1.0)))))
    assert errors[1] / errors[0] < 0.3 and errors[2] / errors[1] < 0.3


cone_states = st.tuples(
    st.floats(0.01, 20.0), st.floats(0.0, 1.0), st.floats(1.0, 4.0), st.floats(1.0, 4.0)
)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.floats(0.1, 10.0), st.sampled_from(sorted(nl.FAMILIES)), cone_states)
def test_cone_preserved(N, lam, name, state):
    grid = default_grid(128)
    amp, share, q1, q2 = state
    r = grid.nodes
    s = StatePair(amp * share * (1 - r ** q1), amp * (1 - share) * (1 - r ** q2))
    p = ProblemSpec(N, lam, nl.from_family(name), nl.ratio_bump())
    with np.errstate(over="ignore"):
        out = apply_T(p, grid, s)
    rep = cone_check(out, grid)
    assert rep.worst_margin >= -1e-9 * max(1.0, out.norm())
    assert np.all(np.diff(out.v1) <= 0) and np.all(np.diff(out.v2) <= 0)
    assert out.v1[-1] == 0.0 and out.v2[-1] == 0.0
    # derivative at the center vanishes to first order
    assert abs(out.v1[1] - out.v1[0]) <= 4 * grid.spacing * max(out.norm(), 1.0)


# -- cone and lemma quantities --------------------------------------------------------


def test_cone_examples(grid):
    q = StatePair.from_functions(grid, lambda r: 1 - r ** 2)
    rep = cone_check(q, grid)
    assert rep.member and rep.concavity_margin >= 0
    assert min(rep.interval_margin) == pytest.approx(7 / 16 - 1 / 4)

    zero = cone_check(StatePair.zeros(grid), grid)
    assert zero.member and zero.worst_margin == 0.0

    ramp = cone_check(StatePair.from_functions(grid, lambda r: r), grid)
    assert ramp.member and ramp.worst_margin == pytest.approx(0.0, abs=1e-15)

    spike = StatePair.from_functions(grid, lambda r: np.exp(-50 * r))
    assert not cone_check(spike, grid).member


def test_weak_bounds_examples():
    lin = ProblemSpec(1, 1.0, nl.linear(), nl.linear())
    wb = weak_bounds(lin, 1.0)
    assert wb.m_hat == pytest.approx(1 / 8)
    assert wb.M_hat == pytest.approx(2.0)
    assert wb.lower == pytest.approx(1 / 64)
    assert wb.upper == pytest.approx(4.0)
    const = weak_bounds(ProblemSpec(2, 1.0, nl.constant(1.0), nl.constant(1.0)), 5.0)
    assert (const.m_hat, const.M_hat) == (1.0, 2.0)
    with pytest.raises(ValueError):
        weak_bounds(lin, 0.0)


def test_weak_bounds_interior_extrema():
    bump = nl.parse_expression("x*exp(-x)")
    wb = weak_bounds(ProblemSpec(1, 1.0, bump, bump), 8.0)
    assert wb.M_hat == pytest.approx(2 * math.exp(-1), rel=1e-10)
    assert wb.m_hat == pytest.approx(8 * math.exp(-8), rel=1e-10)


def test_strong_lower_bound(grid, rng):
    """f(v2) >= (eta v2)^N on [1/4, 3/4] gives ||T s|| >= lam^(1/N) Gamma eta ||v2||."""
    for _ in range(20):
        N = int(rng.integers(1, 4))
        eta = float(rng.uniform(0.5, 2.0))
        lam = float(rng.uniform(0.1, 10.0))
        f = nl.power(N)
        scaled = nl.Nonlinearity(lambda x, e=eta, n=N: (e * x) ** n, ("expr", "(eta x)^N"))
        amp = float(rng.uniform(0.1, 10.0))
        s = StatePair.from_functions(grid, lambda r: amp * (1 - r), lambda r: amp * (1 - r ** 2))
        out = apply_T(ProblemSpec(N, lam, scaled, f), grid, s)
        bound = lam ** (1 / N) * gamma_constant(N) * eta * np.max(s.v2)
        assert out.norm() >= bound - 1e-9
