import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphnls import energy as en
from graphnls import model
from graphnls.constants import MU_HALFLINE, MU_LINE, SQRT3
from graphnls.errors import ModelError
from graphnls.suite import shooting_lambda


def test_soliton_center():
    assert model.soliton(1.0, 0.0) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("L,x", [(1.0, 5.0), (0.5, 3.0), (4.0, 0.7), (2.0, 40.0)])
def test_soliton_against_mpmath(L, x):
    mpmath.mp.dps = 40
    ref = mpmath.sqrt(L) * mpmath.cosh(2 * mpmath.mpf(L) * x / mpmath.sqrt(3)) ** mpmath.mpf(-0.5)
    assert model.soliton(L, x) == pytest.approx(float(ref), rel=1e-13)


def test_soliton_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        model.soliton(0.0, 1.0)


def test_soliton_slope_matches_difference():
    L, x, h = 1.3, 0.8, 1e-5
    fd = (model.soliton(L, x + h) - model.soliton(L, x - h)) / (2 * h)
    assert model.soliton_slope(L, x) == pytest.approx(fd, rel=1e-8)


def test_starred_large_z_limits():
    s = model.starred(40.0)
    assert s.phi_star < 1e-9 and s.H_star < 1e-19
    assert s.uM_star >= 1.0 and s.uM4_minus_one > 0
    assert s.uM_star - 1.0 < 1e-15


def test_starred_small_z_limits():
    s = model.starred(1e-4)
    assert 0.999999 < s.phi_star < 1.0
    assert 1.0 < s.uM_star < 1.000001


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 30.0))
def test_starred_root(z):
    s = model.starred(z)
    mpmath.mp.dps = 50
    # independent root of u^6 - u^2 = 6 H* from the defining formulas
    sech = 1 / mpmath.cosh(2 * mpmath.mpf(z) / mpmath.sqrt(3))
    six_h = 3 * sech * (1 - sech ** 2)
    root = mpmath.findroot(lambda u: u ** 6 - u ** 2 - six_h, mpmath.mpf(1) + six_h / 4)
    assert s.uM_star == pytest.approx(float(root), rel=1e-14)
    assert s.uM4_minus_one == pytest.approx(float(root ** 4 - 1), rel=1e-9)
    assert s.phi_star == pytest.approx(float(mpmath.sqrt(sech)), rel=1e-13)
    # the orbit polynomial is positive between phi* and uM*
    v = np.linspace(s.phi_star, s.uM_star, 50)[:-1]
    assert np.all(s.poly(v) > 0)


def test_lambda_linear_growth():
    r = [model.lambda_of(z) / z for z in (10.0, 20.0, 40.0)]
    assert r[0] < r[1] < r[2] < 1.0
    assert r[2] - r[1] < 0.6 * (r[1] - r[0])
    offsets = [model.lambda_of(z) - z for z in (10.0, 20.0, 40.0)]
    assert max(offsets) - min(offsets) < 1e-6


@pytest.mark.parametrize("z", [0.5, 2.0])
def test_lambda_against_shooting(z):
    assert model.lambda_of(z) == pytest.approx(shooting_lambda(z), rel=1e-6)


def test_negative_n_rejected():
    with pytest.raises(ValueError):
        model.lambda_of(1.0, -1)
    with pytest.raises(ValueError):
        model.mass_of(1.0, -1)


def test_mass_limits():
    assert model.mass_of(0.05) == pytest.approx(MU_LINE, rel=0.02)
    tail = [model.mass_of(z) for z in (12.0, 20.0, 30.0)]
    assert all(m < MU_HALFLINE for m in tail)
    assert tail[0] < tail[1] < tail[2]
    assert tail[2] == pytest.approx(MU_HALFLINE, rel=1e-10)


@pytest.mark.parametrize("z", [0.1, 1.0, 5.0])
def test_line_mass_closed_form(z):
    assert model.line_mass(z) == pytest.approx(model.line_mass_quadrature(z), rel=1e-12)
    assert model.mass_of(z, check_line=True) > 0


def test_rotation_mass_limits():
    # M* tends to the line soliton mass at both ends of the range
    assert model.family_integrals(0.05).rotation_mass == pytest.approx(MU_LINE, rel=0.02)
    assert model.family_integrals(12.0).rotation_mass == pytest.approx(MU_LINE, rel=1e-4)
    z = 3.0
    assert model.mass_of(z, 1) == pytest.approx(
        model.mass_of(z) + model.family_integrals(z).rotation_mass, rel=1e-14)


def test_mass_derivative_matches_secant():
    z = 5.0
    h = 1e-4
    secant = (model.mass_of(z + h) - model.mass_of(z - h)) / (2 * h)
    assert model.mass_derivative(z) == pytest.approx(secant, rel=1e-5)


def test_mass_derivative_positive_on_tail():
    for z in (6.0, 8.0, 10.0, 12.0):
        assert model.mass_derivative(z) > 0


@pytest.mark.parametrize("z", [0.5, 2.0, 5.0])
def test_build_profile_consistency(z):
    sol = model.build_profile(z)
    assert en.mass(sol.profile) == pytest.approx(sol.mu, rel=1e-5)
    assert sol.hamiltonian_drift < 1e-9
    assert sol.omega == pytest.approx(sol.Lambda ** 2 / 3)
    # junction slope equals the kink of the two soliton tails
    assert sol.junction_slope == pytest.approx(
        2 * abs(model.soliton_slope(sol.Lambda, sol.y)), rel=1e-8)
    assert abs(sol.tip_slope) < 1e-6 * sol.Lambda ** 1.5
    assert sol.profile.values.min() >= 0


def test_build_profile_continuity_at_junction():
    sol = model.build_profile(2.0)
    g = sol.profile
    assert g.edge("pendant")[1][0] == pytest.approx(model.soliton(sol.Lambda, sol.y), rel=1e-12)


def test_sample_reproduces_profile():
    sol = model.build_profile(2.0, pendant_cells=400, halfline_cells=400)
    again = sol.sample(sol.profile.grid)
    assert np.max(np.abs(again.values - sol.profile.values)) < 1e-10


def test_mass_curve_summary():
    c = model.mass_curve(0.05, 12.0, 80)
    assert c.local_minima == 1 and c.interior_min
    assert c.mu_min < MU_HALFLINE
    assert c.band == (c.mu_min, MU_LINE)
    assert 3.0 < c.z_at_min < 3.3


def test_mass_curve_two_samples():
    c = model.mass_curve(1.0, 2.0, 2)
    assert len(list(c.rows())) == 2
    with pytest.raises(ValueError):
        model.mass_curve(1.0, 2.0, 1)
    with pytest.raises(ValueError):
        model.mass_curve(2.0, 1.0, 5)


def test_matching_z():
    mu = 0.98 * MU_HALFLINE
    z = model.matching_z(mu)
    assert model.mass_of(z) == pytest.approx(mu, rel=1e-12)
    assert model.mass_derivative(z) > 0
    z2 = model.matching_z(mu, branch="unstable")
    assert z2 < z and model.mass_of(z2) == pytest.approx(mu, rel=1e-12)
    with pytest.raises(ModelError):
        model.matching_z(0.9 * MU_HALFLINE)
