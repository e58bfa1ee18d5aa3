"""Adaptive Simpson quadrature."""

from __future__ import annotations

import math


class QuadratureError(RuntimeError):
    pass


def _simpson(fa, fm, fb, a, b):
    return (b - a) * (fa + 4.0 * fm + fb) / 6.0


def adaptive_simpson(fun, a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    """Integrate ``fun`` over [a, b] to absolute tolerance ``tol``.

    Classical recursive bisection with the Richardson correction
    ``(S_left + S_right - S) / 15``. Handles integrable endpoint
    singularities of the derivative (square-root type) by deep refinement.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return 0.0
    fa, fb = fun(a), fun(b)
    m = 0.5 * (a + b)
    fm = fun(m)
    whole = _simpson(fa, fm, fb, a, b)

    total = 0.0
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fun(lm), fun(rm)
        left = _simpson(fa, flm, fm, a, m)
        right = _simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15.0 * eps:
                raise QuadratureError(f"no convergence on [{a}, {b}]")
            total += left + right + delta / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, 0.5 * eps, depth + 1))
            stack.append((a, m, fa, flm, fm, left, 0.5 * eps, depth + 1))
    if not math.isfinite(total):
        raise QuadratureError("integral is not finite")
    return total
