"""Adaptive Simpson quadrature and golden-section search."""

from __future__ import annotations

import math
from typing import Callable

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


class QuadratureError(ArithmeticError):
    """Adaptive refinement hit its depth limit before meeting the tolerance."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (estimate {estimate!r})")
        self.estimate = estimate


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
    max_depth: int = 50,
    seeds: int = 8,
) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    The interval is first cut into ``seeds`` equal panels, each refined
    independently with a share of the tolerance; kinks in the integrand are
    then isolated faster than from a single panel.
    """
    if b == a:
        return 0.0
    width = (b - a) / seeds
    total = 0.0
    failures: list[float] = []
    for k in range(seeds):
        lo = a + k * width
        hi = b if k == seeds - 1 else lo + width
        total += _panel(f, lo, hi, tol / seeds, max_depth, failures)
    if failures:
        raise QuadratureError(
            f"adaptive Simpson did not converge within depth {max_depth} "
            f"near x={failures[0]:.6g}",
            total,
        )
    return total


def _panel(f, a, b, tol, max_depth, failures) -> float:
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15.0 * tol:
                failures.append(m)
            total += left + right + delta / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, tol / 2, depth + 1))
            stack.append((a, m, fa, flm, fm, left, tol / 2, depth + 1))
    return total


def golden_section(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-12
) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    Infinite values are allowed and treated as larger than any finite one,
    which lets callers encode infeasibility.
    """
    a, b = min(a, b), max(a, b)
    c = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI2 * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        if d <= c:
            break
    x = 0.5 * (a + b)
    return x, f(x)


def grid_minimize(
    f: Callable[[float], float], a: float, b: float, points: int = 65, tol: float = 1e-12
) -> tuple[float, float]:
    """Global-ish 1-D minimization: coarse grid, then golden section in the
    bracket around the best grid point. Endpoints are always candidates."""
    if b <= a:
        return a, f(a)
    xs = [a + (b - a) * k / (points - 1) for k in range(points)]
    xs[-1] = b
    ys = [f(x) for x in xs]
    k = min(range(points), key=ys.__getitem__)
    best_x, best_y = xs[k], ys[k]
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, points - 1)]
    x, y = golden_section(f, lo, hi, tol)
    if y < best_y:
        best_x, best_y = x, y
    return best_x, best_y
