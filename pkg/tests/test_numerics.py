import math

import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from coalition_forge.numerics import QuadratureError, adaptive_simpson, golden_section, grid_minimize


@pytest.mark.parametrize(
    "f, a, b",
    [
        (math.sin, 0, math.pi),
        (lambda t: t**1.5, 0, 1),
        (lambda t: math.sqrt(t), 0, 1),
        (lambda t: abs(t - 0.3), 0, 1),
        (lambda t: math.exp(-t * t), -2, 3),
        (lambda t: max(t**1.5, 2 * t / 3), 0, 1),
    ],
)
def test_simpson_against_scipy(f, a, b):
    want, _ = integrate.quad(f, a, b, epsabs=1e-13, limit=200, points=[0.3] if a < 0.3 < b else None)
    assert adaptive_simpson(f, a, b, tol=1e-10) == pytest.approx(want, abs=1e-9)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 2))
def test_simpson_exact_on_cubics(c0, c1, c3, b):
    f = lambda t: c0 + c1 * t + c3 * t**3
    want = c0 * b + c1 * b * b / 2 + c3 * b**4 / 4
    assert adaptive_simpson(f, 0, b) == pytest.approx(want, abs=1e-9)


def test_simpson_empty_interval():
    assert adaptive_simpson(math.exp, 1.0, 1.0) == 0.0


def test_simpson_reports_depth_failure_with_estimate():
    with pytest.raises(QuadratureError) as info:
        adaptive_simpson(lambda t: math.sin(1 / t) if t else 0.0, 0, 1, tol=1e-14, max_depth=6)
    assert math.isfinite(info.value.estimate)


@given(st.floats(-5, 5))
def test_golden_section_on_parabola(c):
    x, fx = golden_section(lambda t: (t - c) ** 2 + 1, -10, 10, tol=1e-10)
    # comparisons of f cannot resolve x below about sqrt(machine epsilon)
    assert x == pytest.approx(c, abs=1e-7)
    assert fx == pytest.approx(1)


def test_golden_section_treats_inf_as_infeasible():
    f = lambda t: t if t >= 0.25 else math.inf
    x, fx = golden_section(f, 0, 1, tol=1e-12)
    assert x == pytest.approx(0.25, abs=1e-9)


def test_grid_minimize_finds_endpoint_and_global_minimum():
    assert grid_minimize(lambda t: -t, 0, 1)[0] == 1
    f = lambda t: math.cos(12 * t) + t
    x, _ = grid_minimize(f, 0, 1)
    assert x == pytest.approx((math.pi - math.asin(1 / 12)) / 12, abs=1e-6)
