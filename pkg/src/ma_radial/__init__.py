"""Radial convex solutions of a coupled Monge-Ampere system on the unit ball.

The system is solved in its integral form: a pair (v1, v2) of nonnegative,
nonincreasing functions on [0, 1] with v(1) = 0 is a fixed point of

    T_i(v)(r) = int_r^1 ( lam int_0^s N t^(N-1) h_i(v_j(t)) dt )^(1/N) ds

with h_1 = f, h_2 = g and j the other index.
"""

from .nonlinearity import ExtendedLimit, Nonlinearity, asymptotic_quotient, envelope, parse_expression
from .operator import (
    ProblemFamily,
    ProblemSpec,
    RadialGrid,
    StatePair,
    apply_T,
    cone_check,
    gamma_constant,
    weak_bounds,
)
from .regimes import RegimeReport, classify, nonexistence_window
from .solver import SolverConfig, boundary_shoot, forward_integrate, multi_start, picard_solve
from .sweep import SweepReport, lambda_sweep, threshold_bisect

__version__ = "0.1.0"
