import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphnls import model
from graphnls.constants import MU_HALFLINE, SQRT3
from graphnls.errors import QuadratureError
from graphnls.quadrature import integrate_smooth, integrate_sqrt_singular
from graphnls.suite import brute_force_travel


def test_sech_integral():
    r = integrate_smooth(lambda x: 1.0 / np.cosh(2.0 * x / SQRT3), 0.0, 20.0, 1e-12)
    # tail beyond 20 is about sqrt3 * exp(-40/sqrt3) ~ 1.6e-10
    tail = SQRT3 * math.exp(-40.0 / SQRT3)
    assert r.value == pytest.approx(MU_HALFLINE - tail, rel=1e-11)


def test_polynomial_and_empty():
    assert integrate_smooth(lambda x: x * x, 0.0, 1.0).value == pytest.approx(1 / 3, rel=1e-14)
    r = integrate_smooth(lambda x: np.ones_like(x), 2.0, 2.0)
    assert r.value == 0.0


def test_reversed_interval_rejected():
    with pytest.raises(ValueError):
        integrate_smooth(np.sin, math.pi, 0.0)


def test_arcsine_right():
    r = integrate_sqrt_singular(lambda v: 1.0 / np.sqrt(1.0 - v * v), 0.0, 1.0, "right", 1e-12)
    assert r.value == pytest.approx(math.pi / 2, rel=1e-11)


def test_arcsine_both():
    r = integrate_sqrt_singular(lambda v: 1.0 / np.sqrt(1.0 - v * v), -1.0, 1.0, "both", 1e-12)
    assert r.value == pytest.approx(math.pi, rel=1e-11)


def test_left_singular():
    r = integrate_sqrt_singular(lambda v: 1.0 / np.sqrt(v), 0.0, 4.0, "left", 1e-12)
    assert r.value == pytest.approx(4.0, rel=1e-12)


def test_factored_mode_matches_plain():
    plain = integrate_sqrt_singular(lambda v: np.exp(v) / np.sqrt(1.0 - v), 0.0, 1.0, "right", 1e-12)
    fact = integrate_sqrt_singular(np.exp, 0.0, 1.0, "right", 1e-12, factored=True)
    assert fact.value == pytest.approx(plain.value, rel=1e-11)


def test_bad_singular_argument():
    with pytest.raises(ValueError):
        integrate_sqrt_singular(np.exp, 0.0, 1.0, "middle")


def test_budget_exhaustion():
    with pytest.raises(QuadratureError):
        integrate_smooth(lambda x: np.sin(1.0 / x), 1e-9, 1.0, 1e-14, budget=200)


def test_nan_is_reported():
    with pytest.raises(QuadratureError):
        integrate_smooth(lambda x: np.sqrt(x - 0.5), 0.0, 1.0)


def test_travel_against_brute_force():
    z = 2.0
    fi = model.family_integrals(z)
    ref = brute_force_travel(z)
    assert fi.travel == pytest.approx(ref, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_exponential_closed_form(a, b):
    r = integrate_smooth(lambda x: a * np.exp(-b * x), 0.0, 3.0, 1e-13)
    exact = a / b * -math.expm1(-3.0 * b)
    assert r.value == pytest.approx(exact, rel=1e-11)
    assert r.abs_error_estimate < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0))
def test_scaled_arcsine(c):
    # int_0^c dv / sqrt(c^2 - v^2) = pi / 2 for every c
    f = lambda v: 1.0 / np.sqrt(c * c - v * v)
    r = integrate_sqrt_singular(f, 0.0, c, "right", 1e-12)
    assert r.value == pytest.approx(math.pi / 2, rel=1e-10)
