"""Acceptance and invariant checks, with the independent oracles they use.

Every check returns a :class:`Check`; :func:`run_suite` runs a named list of
them.  The oracles here deliberately avoid the code paths they validate:
the shooting oracle integrates the unscaled ODE without any quadrature, and
the brute-force oracle is a graded midpoint sum.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from graphnls import energy as en
from graphnls import local_min as lm
from graphnls import model
from graphnls import spectral
from graphnls.constants import MU_HALFLINE, MU_LINE, SQRT3
from graphnls.errors import GraphNLSError, UnboundedEnergyError
from graphnls.graph import (classify, halfline_graph, line_graph, normalize, remove_halfline,
                            theorem_hypotheses, tip_graph, MetricGraph, Edge, HalfLine)
from graphnls.grid import GraphFunction, Grid


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} ({self.seconds:.2f}s)"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _timed(name: str, budget: float | None = None):
    def wrap(fn: Callable[..., tuple[bool, dict]]):
        def run(*args, **kw) -> Check:
            t0 = time.perf_counter()
            try:
                ok, detail = fn(*args, **kw)
            except GraphNLSError as exc:
                ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
            dt = time.perf_counter() - t0
            if budget is not None and dt > budget:
                ok = False
                detail["over_budget"] = True
            return Check(name, bool(ok), _plain(detail), dt, budget)
        run.__name__ = fn.__name__
        run.check_name = name
        return run
    return wrap


def _plain(obj):
    """Make numpy scalars JSON-friendly."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# -- oracles --------------------------------------------------------------------

def shooting_lambda(z: float, lam_lo: float = 0.01, factor: float = 1.05) -> float:
    """Lambda_0(z) by shooting the unscaled pendant ODE from the junction.

    For each trial Lambda (with y = z / Lambda) integrate
    u'' = (Lambda^2/3) u - u^5 from u(0) = phi_L(y), u'(0) = 2 |phi_L'(y)|
    up to x = 1 and root-find u'(1) = 0 at the first sign change.
    """
    def tip_slope(L):
        y = z / L
        t = 2.0 * L * y / SQRT3
        u0 = math.sqrt(L) / math.sqrt(math.cosh(t))
        du0 = 2.0 * (L ** 1.5 / SQRT3) * math.tanh(t) / math.sqrt(math.cosh(t))
        sol = solve_ivp(lambda _x, v: [v[1], L * L / 3.0 * v[0] - v[0] ** 5], (0.0, 1.0),
                        [u0, du0], method="RK45", rtol=1e-12, atol=1e-14)
        return sol.y[1, -1]

    L = lam_lo
    f = tip_slope(L)
    while f > 0:
        L_next = L * factor
        f_next = tip_slope(L_next)
        if f_next <= 0:
            return brentq(tip_slope, L, L_next, xtol=1e-14, rtol=1e-14)
        L, f = L_next, f_next
        if L > 1e4:
            break
    raise ArithmeticError(f"no sign change of u'(1) found for z={z}")


def brute_force_travel(z: float, points: int = 10_000_000, chunk: int = 1_000_000) -> float:
    """sqrt3 * int_{phi*}^{uM*} dv / sqrt(6H* - v^6 + v^2) by a graded midpoint sum.

    Uses v = uM* - (uM* - phi*) s^3 so the inverse square root at uM* is
    integrable in s; the polynomial is evaluated through b^6 - b^2 = 6H* as
    (b^2 - v^2)(b^4 + b^2 v^2 + v^4 - 1) with b - v formed directly.
    """
    st = model.starred(z)
    a, b = st.phi_star, st.uM_star
    span = b - a
    b4m1 = (b - 1.0) * (b + 1.0) * (b * b + 1.0)
    total = 0.0
    for start in range(0, points, chunk):
        k = np.arange(start, min(start + chunk, points))
        s = (k + 0.5) / points
        eps = span * s ** 3
        v = b - eps
        poly = eps * (2.0 * b - eps) * (b4m1 + b * b * v * v + v ** 4)
        total += math.fsum(3.0 * span * s ** 2 / np.sqrt(poly))
    return SQRT3 * total / points


def line_soliton(Lambda: float, cells_per_unit: float = 100.0, span: float = 50.0) -> GraphFunction:
    """phi_Lambda on the line graph (two half-lines), truncated at span / Lambda."""
    g = line_graph()
    L = span / Lambda
    n = int(math.ceil(cells_per_unit * span))
    grid = Grid(g, {h: n for h in g.halfline_names}, L)
    return GraphFunction.from_callables(grid, {h: (lambda x: model.soliton(Lambda, x))
                                               for h in g.halfline_names})


# -- random ensembles -------------------------------------------------------------

def random_bumps(grid: Grid, rng: np.random.Generator, *, nonneg: bool = False,
                 max_bumps: int = 4) -> GraphFunction:
    """Sum of Gaussian bumps with random centres, widths and signs on each edge.

    Each edge end is blended into a random value shared by its vertex, so
    the result is continuous; half-lines are damped to zero near the cut.
    """
    arrays = {}
    for name in grid.names:
        x = grid.x(name)
        span = grid.spans[name]
        k = rng.integers(1, max_bumps + 1)
        vals = np.zeros_like(x)
        for _ in range(k):
            c = rng.uniform(0, min(span, 8.0))
            w = rng.uniform(0.2, 2.0)
            a = rng.uniform(0.1, 1.5) * (1 if nonneg else rng.choice([-1, 1]))
            vals += a * np.exp(-((x - c) / w) ** 2)
        arrays[name] = vals
    # enforce continuity: blend every edge end to a common vertex value
    vertex_val = {v: rng.uniform(0.0 if nonneg else -1.0, 1.0) for v in grid.graph.vertices}
    for name in grid.names:
        x = grid.x(name)
        span = grid.spans[name]
        vals = arrays[name]
        if grid.is_halfline[name]:
            v0 = vertex_val[grid.graph.halfline(name).at]
            ramp = np.exp(-x / 0.5)
            vals = vals * (1 - ramp) + v0 * ramp
            vals *= np.exp(-np.maximum(x - 0.7 * span, 0.0) ** 2)
            vals[-1] = 0.0
        else:
            e = grid.graph.edge(name)
            va, vb = vertex_val[e.start], vertex_val[e.end]
            s = x / span
            lo, hi = (1 - s) ** 4, s ** 4
            vals = vals * (1 - lo) * (1 - hi) + va * lo + vb * hi
        arrays[name] = np.maximum(vals, 0.0) if nonneg else vals
    return GraphFunction.from_edge_arrays(grid, arrays)


def _property_grid(g: MetricGraph) -> Grid:
    return Grid.uniform(g, 0.01, halfline_length=20.0, h_halfline=0.01)


# -- acceptance -------------------------------------------------------------------

@_timed("1 soliton mass equals mu_R for Lambda in {0.5, 1, 4}", budget=1.0)
def check_soliton_mass():
    errs = {}
    for L in (0.5, 1.0, 4.0):
        m = en.mass(line_soliton(L))
        errs[str(L)] = abs(m - MU_LINE) / MU_LINE
    return max(errs.values()) < 1e-8, {"rel_errors": errs}


@_timed("2 mass curve on [0.05, 12] reproduces the figure", budget=60.0)
def check_mass_curve(samples: int = 400):
    c = model.mass_curve(0.05, 12.0, samples, 0)
    tail = c.mu_prime[c.z >= 6.0]
    d = {
        "mu_0.05": float(c.mu[0]),
        "rel_gap_to_mu_R": abs(c.mu[0] - MU_LINE) / MU_LINE,
        "mu_12": float(c.mu[-1]),
        "rel_gap_to_mu_R+": abs(c.mu[-1] - MU_HALFLINE) / MU_HALFLINE,
        "mu_min": c.mu_min, "z_at_min": c.z_at_min,
        "sampled_local_minima": c.local_minima,
        "min_mu_prime_on_[6,12]": float(np.min(tail)),
    }
    ok = (d["rel_gap_to_mu_R"] < 0.02 and c.mu[-1] < MU_HALFLINE
          and d["rel_gap_to_mu_R+"] < 0.01 and c.local_minima == 1
          and c.mu_min < MU_HALFLINE and bool(np.all(tail > 0)))
    return ok, d


@_timed("3 grid mass and shooting agree with the model formulas", budget=30.0)
def check_consistency():
    d = {}
    ok = True
    for z in (0.5, 2.0, 5.0):
        sol = model.build_profile(z)
        grid_mass = en.mass(sol.profile)
        rm = abs(grid_mass - sol.mu) / sol.mu
        lam_shoot = shooting_lambda(z)
        rl = abs(lam_shoot - sol.Lambda) / sol.Lambda
        d[str(z)] = {"mass_rel": rm, "lambda_rel": rl, "Lambda": sol.Lambda,
                     "Lambda_shooting": lam_shoot}
        ok = ok and rm < 1e-5 and rl < 1e-6
    return ok, d


def residual_orders(z: float = 2.0, base: tuple[int, int] = (100, 400), halvings: int = 2):
    rows = []
    for k in range(halvings + 1):
        f = 2 ** k
        sol = model.build_profile(z, pendant_cells=base[0] * f, halfline_cells=base[1] * f)
        r = en.residuals(sol.profile, sol.omega)
        rows.append((r.nls_residual, r.kirchhoff_residual))
    rows = np.array(rows)
    orders = np.log2(rows[:-1] / rows[1:])
    return rows, orders


@_timed("4 stationarity residuals converge at second order", budget=30.0)
def check_residual_order():
    rows, orders = residual_orders()
    ok = bool(np.all(orders >= 1.8))
    return ok, {"residuals": rows.tolist(), "orders_nls": orders[:, 0].tolist(),
                "orders_kirchhoff": orders[:, 1].tolist()}


@_timed("5 spectrum at z = 8: kernel, Morse index 1, stable", budget=120.0)
def check_spectrum(z: float = 8.0):
    r = spectral.gss_verdict(z)
    ok = (r.kernel_gap < 1e-4 and r.kernel_cosine > 0.999 and r.morse_index == 1
          and r.gss_stable and r.unknowns <= 10_000)
    return ok, {"kernel_gap": r.kernel_gap, "kernel_cosine": r.kernel_cosine,
                "morse_index": r.morse_index, "gss_stable": r.gss_stable,
                "eigenvalues": r.eigenvalues, "unknowns": r.unknowns}


def minimizer_vs_model(fraction: float) -> dict[str, Any]:
    """Minimize on the tip graph at mu = fraction * mu_R+ and compare with u_z."""
    mu = fraction * MU_HALFLINE
    rep = lm.minimize(tip_graph(), lm.ConstraintSpec(mu))
    cert = lm.certify(rep)
    d: dict[str, Any] = {"mu": mu, "report": rep.to_dict(), "certificate": cert["status"],
                         "failed_clauses": cert["failed"], "limit": 1e-2 * math.sqrt(mu)}
    try:
        z = model.matching_z(mu)
        sol = model.build_profile(z)
        ref = sol.sample(rep.minimizer.grid)
        d["z"] = z
        d["distance"] = math.sqrt(en.mass(rep.minimizer - ref))
    except GraphNLSError as exc:
        d["z"] = None
        d["distance"] = None
        d["model_error"] = str(exc)
    d["ok"] = (rep.converged and cert["status"] == "PASS" and d["distance"] is not None
               and d["distance"] < d["limit"])
    return d


def supercritical_diverges(fraction: float = 1.2) -> dict[str, Any]:
    try:
        rep = lm.minimize(tip_graph(), lm.ConstraintSpec(fraction * MU_HALFLINE))
    except UnboundedEnergyError as exc:
        return {"unbounded": True, "message": str(exc)}
    return {"unbounded": False, "energy": rep.energy, "converged": rep.converged}


@_timed("6 local minimizer on the tip graph at 0.95 mu_R+; divergence at 1.2 mu_R+",
        budget=300.0)
def check_local_min():
    below = minimizer_vs_model(0.95)
    above = supercritical_diverges(1.2)
    return below["ok"] and above["unbounded"], {"0.95": below, "1.2": above}


@_timed("6b local minimizer inside the band (0.97 mu_R+) matches the family", budget=300.0)
def check_local_min_in_band(fraction: float = 0.97):
    d = minimizer_vs_model(fraction)
    return d["ok"], d


def gn_ensemble(g: MetricGraph, mu_G: float, count: int, rng) -> tuple[int, float]:
    grid = _property_grid(g)
    worst = 0.0
    bad = 0
    for _ in range(count):
        u = random_bumps(grid, rng)
        c = en.gn_check(u, mu_G)
        worst = max(worst, c.ratio)
        bad += not c.satisfied
    return bad, worst


def coercivity_ensemble(g: MetricGraph, mu_G: float, count: int, rng) -> tuple[int, float]:
    grid = _property_grid(g)
    bad = 0
    worst = -math.inf
    for _ in range(count):
        u = random_bumps(grid, rng)
        mu = rng.uniform(0.05, 0.99) * mu_G
        u = u.with_values(u.values * math.sqrt(mu / en.mass(u)))
        k = en.kinetic(u)
        bound = 0.5 * (1 - (mu / mu_G) ** 2) * k - 1e-6 * k
        e = en.energy(u)
        worst = max(worst, bound - e)
        bad += e < bound
    return bad, worst


def random_tail(grid: Grid, name: str, rng) -> GraphFunction:
    """Nonnegative half-line profile with a random bump and half-line mass below mu_R+."""
    x = grid.x(name)
    vals = np.zeros_like(x)
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(0.0, 6.0)
        w = rng.uniform(0.3, 2.0)
        vals += rng.uniform(0.05, 1.0) * np.exp(-((x - c) / w) ** 2)
    vals[0] = rng.uniform(0.0, 1.2) * np.max(vals)
    vals *= np.exp(-np.maximum(x - 10.0, 0) ** 2)
    vals[-1] = 0.0
    u = GraphFunction.from_edge_arrays(grid, {name: vals})
    m = en.mass(u)
    target = rng.uniform(0.05, 0.95) * MU_HALFLINE
    if m > target:
        u = u.with_values(u.values * math.sqrt(target / m))
    return u


def rearrangement_ensemble(count: int, rng) -> dict[str, Any]:
    g = halfline_graph()
    grid = Grid(g, {"h": 4000}, 20.0)
    increases = 0
    worst = -math.inf
    thetas = []
    for _ in range(count):
        u = random_tail(grid, "h", rng)
        r = lm.decreasing_rearrange(u, "h")
        e0, e1 = en.energy(u), en.energy(r.u)
        worst = max(worst, e1 - e0)
        increases += e1 > e0 + 1e-12 * max(1.0, abs(e0))
        thetas.append(r.theta)
    return {"increases": increases, "worst_change": worst,
            "theta_below_one": int(sum(t < 1 for t in thetas))}


@_timed("7 property suites: GN, coercivity, rearrangement, invariants", budget=120.0)
def check_properties(seed: int = 0):
    rng = np.random.default_rng(seed)
    d: dict[str, Any] = {}
    ok = True
    for label, g, mu_G in (("line", line_graph(), MU_LINE),
                           ("halfline", halfline_graph(), MU_HALFLINE),
                           ("tip", tip_graph(), MU_HALFLINE)):
        bad, worst = gn_ensemble(g, mu_G, 200, rng)
        d[f"gn_{label}"] = {"violations": bad, "max_ratio": worst}
        ok = ok and bad == 0
    for label, g, mu_G in (("line", line_graph(), MU_LINE),
                           ("halfline", halfline_graph(), MU_HALFLINE)):
        bad, worst = coercivity_ensemble(g, mu_G, 200, rng)
        d[f"coercivity_{label}"] = {"violations": bad, "max_deficit": worst}
        ok = ok and bad == 0
    rr = rearrangement_ensemble(100, rng)
    d["rearrangement"] = rr
    ok = ok and rr["increases"] == 0
    inv = run_suite("invariants").checks
    d["invariants"] = {c.name: c.passed for c in inv}
    ok = ok and all(c.passed for c in inv)
    return ok, d


ACCEPTANCE = [check_soliton_mass, check_mass_curve, check_consistency, check_residual_order,
              check_spectrum, check_local_min, check_local_min_in_band, check_properties]


# -- invariants -------------------------------------------------------------------

@_timed("normalization is idempotent and classification is label-invariant")
def inv_graph():
    g = MetricGraph(("a", "b", "c", "d"),
                    (Edge("e1", "a", "b", 1.0), Edge("e2", "b", "c", 0.5),
                     Edge("e3", "c", "d", 2.0), Edge("e4", "c", "d", 1.0)),
                    (HalfLine("h1", "a"), HalfLine("h2", "a")))
    n1 = normalize(g)
    n2 = normalize(n1)
    relabel = MetricGraph(("x", "y", "w", "q"),
                          (Edge("f1", "x", "y", 1.0), Edge("f2", "y", "w", 0.5),
                           Edge("f3", "w", "q", 2.0), Edge("f4", "w", "q", 1.0)),
                          (HalfLine("k1", "x"), HalfLine("k2", "x")))
    c1, c2 = classify(n1), classify(normalize(relabel))
    tip = tip_graph()
    preserved = all(classify(remove_halfline(tip, h)).critical_mass == classify(tip).critical_mass
                    for h in tip.halfline_names)
    ok = (n1 == n2 and c1.case == c2.case and c1.cycle_covering == c2.cycle_covering
          and preserved and theorem_hypotheses(tip)["satisfied"])
    return ok, {"case": c1.case.value}


@_timed("starred identities, scaling closure and turning value")
def inv_starred():
    worst = {"six_h": 0.0, "estar": 0.0, "slope": 0.0, "scaling": 0.0}
    ok = True
    for z in (0.1, 0.5, 1.0, 2.0, 5.0, 8.0):
        s = model.starred(z)
        worst["six_h"] = max(worst["six_h"], abs(6 * s.H_star - 3 * s.phi_star ** 2 * (1 - s.phi_star ** 4)))
        b = s.uM_star
        worst["estar"] = max(worst["estar"], abs(b ** 6 - b ** 2 - 6 * s.H_star) / max(6 * s.H_star, 1e-300))
        L = model.lambda_of(z)
        y = z / L
        phi = float(model.soliton(L, y))
        lhs = 2 * abs(float(model.soliton_slope(L, y)))
        rhs = 2 / SQRT3 * phi * math.sqrt(L ** 2 - phi ** 4)
        worst["slope"] = max(worst["slope"], abs(lhs - rhs) / rhs)
        # unscaled quantities at two Lambdas with the same z
        for L2 in (0.7 * L, 1.9 * L):
            y2 = z / L2
            ph = float(model.soliton(L2, y2))
            H = 0.5 * (2 * float(model.soliton_slope(L2, y2))) ** 2 + ph ** 6 / 6 - L2 ** 2 * ph ** 2 / 6
            worst["scaling"] = max(worst["scaling"], abs(H / L2 ** 3 - s.H_star),
                                   abs(ph / math.sqrt(L2) - s.phi_star))
        ok = ok and math.sqrt(L) * b > math.sqrt(L)
    ok = ok and worst["six_h"] < 1e-12 and worst["estar"] < 1e-10 and worst["slope"] < 1e-10 \
        and worst["scaling"] < 1e-12
    return ok, worst


@_timed("omega increasing, ladder linear, line mass two ways")
def inv_ladder():
    zs = np.linspace(0.1, 12, 40)
    om = np.array([model.lambda_of(z) ** 2 / 3 for z in zs])
    lin = max(abs((model.lambda_of(z, 3) - model.lambda_of(z)) - 3 * (model.lambda_of(z, 1) - model.lambda_of(z)))
              for z in (0.5, 2.0, 6.0))
    line = max(abs(model.line_mass(z) - model.line_mass_quadrature(z)) for z in (0.05, 1.0, 4.0, 10.0))
    ok = bool(np.all(np.diff(om) > 0)) and lin < 1e-9 and line < 1e-11
    return ok, {"ladder": lin, "line_mass": line}


@_timed("quadrature additivity and error-estimate honesty")
def inv_quadrature():
    from graphnls.quadrature import integrate_smooth, integrate_sqrt_singular
    battery = [
        (np.exp, 0.0, 1.0, math.e - 1),
        (np.cos, 0.0, math.pi / 2, 1.0),
        (lambda x: 1 / (1 + x * x), 0.0, 1.0, math.pi / 4),
        (lambda x: np.sqrt(x), 0.0, 1.0, 2 / 3),
    ]
    honest = True
    for f, a, b, exact in battery:
        r = integrate_smooth(f, a, b, 1e-10)
        honest = honest and abs(r.value - exact) <= max(10 * r.abs_error_estimate, 1e-15)
    f = lambda x: np.exp(-x) * np.sin(3 * x)  # noqa: E731
    whole = integrate_smooth(f, 0.0, 4.0, 1e-12)
    parts = integrate_smooth(f, 0.0, 1.3, 1e-12) + integrate_smooth(f, 1.3, 4.0, 1e-12)
    add = abs(whole.value - parts.value) <= whole.abs_error_estimate + parts.abs_error_estimate + 1e-15
    g = lambda v: np.cos(v)  # noqa: E731
    sub = integrate_sqrt_singular(lambda v: g(v) / np.sqrt(2.0 - v), 0.0, 2.0, "right", 1e-12)
    ref = integrate_smooth(lambda t: 2 * g(2.0 - t * t), 0.0, math.sqrt(2.0), 1e-12)
    return honest and add and abs(sub.value - ref.value) < 1e-12, {}


@_timed("mass partition, refinement and spectral symmetry")
def inv_energy_spectral():
    sol = model.build_profile(2.0, pendant_cells=400, halfline_cells=1600)
    u = sol.profile
    parts = en.core_mass(u) + en.mass_on(u, u.grid.halfline_names)
    partition = abs(parts - en.mass(u))
    re = spectral.assemble(u, sol.omega, "real")
    im = spectral.assemble(u, sol.omega, "imag")
    sym = abs(re.matrix - re.matrix.T).max()
    diff = np.max(np.abs((im.potential - re.potential) + 4 * u.values ** 4))
    coarse = model.build_profile(2.0, pendant_cells=200, halfline_cells=800)
    e1, e2 = en.energy(coarse.profile), en.energy(u)
    fine = model.build_profile(2.0, pendant_cells=800, halfline_cells=3200)
    e3 = en.energy(fine.profile)
    ratio = abs(e1 - e2) / abs(e2 - e3)
    ok = partition < 1e-13 and sym == 0 and diff < 1e-13 and 3.0 < ratio < 5.0
    return ok, {"partition": partition, "symmetry": float(sym), "potential_diff": diff,
                "energy_refinement_ratio": ratio}


INVARIANTS = [inv_graph, inv_starred, inv_ladder, inv_quadrature, inv_energy_spectral]


@dataclass
class SuiteReport:
    name: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {"suite": self.name, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}


SUITES = {"acceptance": ACCEPTANCE, "invariants": INVARIANTS}


def run_suite(name: str, *, echo: Callable[[str], None] | None = None) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    out = []
    for fn in SUITES[name]:
        c = fn()
        if echo:
            echo(c.line)
        out.append(c)
    return SuiteReport(name, out)
