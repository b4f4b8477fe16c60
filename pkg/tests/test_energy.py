import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphnls import energy as en
from graphnls import model
from graphnls.constants import MU_HALFLINE, MU_LINE
from graphnls.graph import Edge, HalfLine, MetricGraph, line_graph, tip_graph
from graphnls.grid import GraphFunction, Grid
from graphnls.suite import line_soliton, random_bumps


@pytest.fixture(scope="module")
def soliton1():
    return line_soliton(1.0, cells_per_unit=400.0)


@pytest.fixture(scope="module")
def profile2():
    return model.build_profile(2.0)


def test_soliton_energy_and_mass(soliton1):
    assert abs(en.energy(soliton1)) < 1e-6
    assert en.mass(soliton1) == pytest.approx(MU_LINE, rel=1e-8)


def test_zero_function():
    grid = Grid.uniform(tip_graph(), 0.05, halfline_length=5.0)
    u = GraphFunction.zeros(grid)
    assert en.energy(u) == 0.0 and en.mass(u) == 0.0
    r = en.residuals(u, 0.7)
    assert r.nls_residual == 0.0 and r.kirchhoff_residual == 0.0
    c = en.gn_check(u, MU_HALFLINE)
    assert c.lhs == 0.0 and c.rhs == 0.0 and c.satisfied


def test_tent_on_pendant():
    grid = Grid(tip_graph(), {"pendant": 2000, "h_plus": 10, "h_minus": 10}, 5.0)
    u = GraphFunction.from_callables(grid, {
        "pendant": lambda x: 1.0 - np.abs(2.0 * x - 1.0),
        "h_plus": lambda x: 0.0 * x,
        "h_minus": lambda x: 0.0 * x,
    })
    # int |u'|^2 = 4, int u^6 = 1/7, int u^2 = 1/3 over the unit pendant
    assert en.kinetic(u) == pytest.approx(4.0, rel=1e-3)
    assert en.potential(u) == pytest.approx(1.0 / 7.0, rel=1e-6)
    assert en.energy(u) == pytest.approx(2.0 - 1.0 / 42.0, rel=1e-3)
    assert en.mass(u) == pytest.approx(1.0 / 3.0, rel=1e-8)
    assert en.mass_on(u, ["h_plus", "h_minus"]) == 0.0
    assert en.core_mass(u) == pytest.approx(1.0 / 3.0, rel=1e-8)


def test_gn_extremal_soliton(soliton1):
    c = en.gn_check(soliton1, MU_LINE)
    # the soliton saturates the inequality; the discrete ratio sits within O(h^2) of 1
    assert c.ratio >= 0.999
    assert abs(c.ratio - 1.0) < 1e-5


def test_gn_random_bumps_line():
    rng = np.random.default_rng(1)
    grid = Grid.uniform(line_graph(), 0.01, halfline_length=20.0)
    for _ in range(200):
        assert en.gn_check(random_bumps(grid, rng), MU_LINE).satisfied


def test_multiplier_soliton(soliton1):
    assert en.lagrange_multiplier(soliton1) == pytest.approx(1.0 / 3.0, abs=1e-4)


def test_multiplier_model(profile2):
    lam = en.lagrange_multiplier(profile2.profile)
    assert lam > 0
    assert lam == pytest.approx(profile2.Lambda ** 2 / 3.0, rel=1e-4)


def test_multiplier_linear_limit_on_loop():
    L = 3.0
    g = MetricGraph(("a",), (Edge("loop", "a", "a", L),), ())
    grid = Grid(g, {"loop": 3000})
    k = 2 * math.pi / L
    eps = 1e-4
    u = GraphFunction.from_callables(grid, {"loop": lambda x: eps * (2.0 + np.cos(k * x))})
    rayleigh = -en.kinetic(u) / en.mass(u)
    # nonlinear term is eps^4 smaller than the kinetic one
    assert en.lagrange_multiplier(u) == pytest.approx(rayleigh, rel=1e-10)
    # int |u'|^2 / int u^2 = (k^2 / 2) / (4 + 1/2) for this mode
    assert rayleigh == pytest.approx(-(k * k / 2) / 4.5, rel=1e-5)


def test_zero_mass_multiplier_raises():
    grid = Grid.uniform(tip_graph(), 0.1, halfline_length=2.0)
    with pytest.raises(ValueError):
        en.lagrange_multiplier(GraphFunction.zeros(grid))


def test_residual_orders():
    rows = []
    for f in (1, 2, 4):
        sol = model.build_profile(2.0, pendant_cells=100 * f, halfline_cells=400 * f)
        r = en.residuals(sol.profile, sol.omega)
        rows.append((r.nls_residual, r.kirchhoff_residual))
    rows = np.array(rows)
    orders = np.log2(rows[:-1] / rows[1:])
    assert np.all(orders[:, 0] > 1.8)
    assert np.all(orders[:, 1] > 0.9)


def test_noise_has_large_residual(profile2):
    r0 = en.residuals(profile2.profile, profile2.omega)
    rng = np.random.default_rng(3)
    noisy = profile2.profile.with_values(rng.uniform(0, 1, profile2.profile.grid.n_nodes))
    r1 = en.residuals(noisy, profile2.omega)
    assert r1.nls_residual > 10 * r0.nls_residual
    assert r1.kirchhoff_residual > 10 * r0.kirchhoff_residual


def test_residual_positivity_fields(profile2):
    r = en.residuals(profile2.profile, profile2.omega)
    assert r.vertex_min > 0.1
    assert r.positivity_min >= 0


def test_newton_stationary_fixed_mass(profile2):
    sol = model.build_profile(2.0, pendant_cells=200, halfline_cells=400)
    F = en.LumpedFunctional(sol.profile.grid)
    target = F.mass(sol.profile.values)
    u, lam = en.newton_stationary(sol.profile, target_mass=target)
    assert F.mass(u.values) == pytest.approx(target, rel=1e-12)
    assert lam == pytest.approx(sol.omega, rel=1e-3)
    assert F.multiplier(u.values) == pytest.approx(lam, rel=1e-8)


def test_newton_requires_one_mode(profile2):
    with pytest.raises(ValueError):
        en.newton_stationary(profile2.profile)
    with pytest.raises(ValueError):
        en.newton_stationary(profile2.profile, omega=1.0, target_mass=1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_lumped_gradient_matches_difference(seed):
    rng = np.random.default_rng(seed)
    grid = Grid(tip_graph(), {"pendant": 20, "h_plus": 20, "h_minus": 20}, 3.0)
    F = en.LumpedFunctional(grid)
    u = rng.uniform(0.0, 1.0, grid.n_nodes)
    d = rng.normal(size=grid.n_nodes)
    t = 1e-6
    fd = (F.energy(u + t * d) - F.energy(u - t * d)) / (2 * t)
    assert float(F.gradient(u) @ d) == pytest.approx(fd, rel=1e-6, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.1, 2.0))
def test_mass_scaling(a, s):
    # mass is quadratic, energy parts scale with their homogeneity
    grid = Grid.uniform(line_graph(), 0.02, halfline_length=15.0)
    u = GraphFunction.from_callables(grid, {n: lambda x: np.exp(-x * x / s) for n in grid.names})
    v = u.with_values(a * u.values)
    assert en.mass(v) == pytest.approx(a * a * en.mass(u), rel=1e-12)
    assert en.kinetic(v) == pytest.approx(a * a * en.kinetic(u), rel=1e-12)
    assert en.potential(v) == pytest.approx(a ** 6 * en.potential(u), rel=1e-12)
