"""Local minimizers of the energy in the doubly constrained set

    A = { u : int_G u^2 = mu,  int_K u^2 >= eta }

by projected descent with half-line rearrangement, plus a certificate.

The descent works on the lumped (P1 + trapezoid) functional, so the
mass constraint is exact for the trapezoid mass of every accepted iterate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from graphnls import energy as en
from graphnls.constants import MU_HALFLINE, MU_LINE
from graphnls.errors import (ConstraintError, ConvergenceError, GraphError, HypothesisError,
                             UnboundedEnergyError)
from graphnls.graph import Case, MetricGraph, classify, theorem_hypotheses
from graphnls.grid import GraphFunction, Grid
from graphnls.model import soliton


@dataclass(frozen=True)
class ConstraintSpec:
    mu: float
    eta: float | None = None
    delta: float = 0.2

    def __post_init__(self):
        if not self.mu > 0:
            raise ConstraintError(f"mass must be positive, got {self.mu}")
        if self.eta is None:
            object.__setattr__(self, "eta", self.mu / 2)
        if not self.delta > 0:
            raise ConstraintError(f"collar width must be positive, got {self.delta}")

    def violations(self, tip: bool = True) -> list[str]:
        """The data inequalities that fail, as readable strings."""
        mu, eta, d = self.mu, self.eta, self.delta
        checks = [
            (0 < eta < mu, f"0 < eta < mu  (eta={eta:.6g}, mu={mu:.6g})"),
            (mu - eta < MU_HALFLINE, f"mu - eta < mu_R+  ({mu - eta:.6g} >= {MU_HALFLINE:.6g})"),
            ((1 + d) * eta < mu, f"(1+delta) eta < mu  ({(1 + d) * eta:.6g} >= {mu:.6g})"),
        ]
        if not tip:
            checks += [
                (eta > MU_HALFLINE, f"eta > mu_R+  ({eta:.6g} <= {MU_HALFLINE:.6g})"),
                ((1 + 2 * d) * eta < MU_LINE,
                 f"(1+2 delta) eta < mu_R  ({(1 + 2 * d) * eta:.6g} >= {MU_LINE:.6g})"),
            ]
        return [msg for ok, msg in checks if not ok]

    def validate(self, tip: bool = True) -> None:
        bad = self.violations(tip)
        if bad:
            raise ConstraintError("constraint data violate: " + "; ".join(bad))


# -- competitors ----------------------------------------------------------------

def _cutoff_profile(Lambda: float, x: np.ndarray, d: float, symmetric: bool) -> np.ndarray:
    if symmetric:
        s = x - d / 2
        return np.maximum(soliton(Lambda, s) - soliton(Lambda, d / 2), 0.0)
    return np.maximum(soliton(Lambda, x) - soliton(Lambda, d), 0.0)


def cutoff_mass_sup(symmetric: bool) -> float:
    """Supremum of the cutoff-soliton mass map (approached as Lambda -> inf)."""
    return MU_LINE if symmetric else MU_HALFLINE


def cutoff_soliton(grid: Grid, mu: float, edge: str, tip_end: str | None = None,
                   *, tol: float = 1e-12) -> GraphFunction:
    """(phi_L(x) - phi_L(d))^+ on one bounded edge, zero elsewhere, with mass mu.

    With ``tip_end`` the peak sits at that endpoint (it should be a terminal
    point); without it the profile is centred on the edge and vanishes at
    both ends.  Lambda is found by root bracketing on the increasing map
    Lambda -> mass.
    """
    g = grid.graph
    e = g.edge(edge)
    if e.is_loop and tip_end is not None:
        raise GraphError("a loop has no tip end")
    symmetric = tip_end is None
    if not symmetric and tip_end not in (e.start, e.end):
        raise GraphError(f"{tip_end!r} is not an endpoint of {edge!r}")
    sup = cutoff_mass_sup(symmetric)
    if not 0 < mu < sup:
        raise ConstraintError(f"mass {mu} outside the attainable range (0, {sup:.9f})")
    x = grid.x(edge)
    if not symmetric and tip_end == e.end and not e.is_loop:
        x = e.length - x
    d = e.length

    def build(L):
        arrays = {n: np.zeros(grid.cells[n] + 1) for n in grid.names}
        arrays[edge] = _cutoff_profile(L, x, d, symmetric)
        return GraphFunction.from_edge_arrays(grid, arrays)

    def excess(logL):
        return en.mass(build(math.exp(logL))) - mu

    lo, hi = -10.0, 1.0
    while excess(hi) < 0:
        hi += 1.0
        if hi > 12:
            raise ConstraintError(f"mass {mu} not reached on this grid (refine the edge)")
    logL = brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    w = build(math.exp(logL))
    m = en.mass(w)
    if abs(m - mu) > tol * max(1.0, mu):
        w = w.with_values(w.values * math.sqrt(mu / m))
    return w


def cutoff_lambda(grid: Grid, mu: float, edge: str, tip_end: str | None = None) -> float:
    """Soliton parameter used by :func:`cutoff_soliton` (peak value squared + cutoff)."""
    w = cutoff_soliton(grid, mu, edge, tip_end)
    peak = float(np.max(w.values))
    e = grid.graph.edge(edge)
    d = e.length if tip_end is not None else e.length / 2
    return brentq(lambda L: soliton(L, 0.0) - soliton(L, d) - peak, 1e-8, 1e6, xtol=1e-14)


# -- rearrangement -----------------------------------------------------------------

@dataclass(frozen=True)
class Rearranged:
    u: GraphFunction
    theta: float


def _rearrange_samples(a: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Rearrange a half-line sample array a[0..N] (a[0] = vertex, a[N] = 0)."""
    vertex = a[0]
    inner = np.sort(a[1:-1])[::-1]
    if inner.size == 0 or inner[0] <= vertex:
        return np.concatenate([[vertex], inner, [0.0]]), 1.0
    # the peak would sit above the vertex value: theta-map sqrt(t) u*(t x)
    star = np.concatenate([[inner[0]], inner, [0.0]])
    # u* keeps the cell structure: its samples sit at x_0 = 0 and x_1.. as before
    theta = (vertex / inner[0]) ** 2
    if theta == 0.0:
        out = np.zeros_like(a)
        return out, 0.0
    stretched = np.interp(theta * x, x, star, right=0.0)
    # the stretched profile no longer vanishes at the truncation point; a
    # linear correction restores the zero without a cliff and keeps it decreasing
    stretched -= stretched[-1] * x / x[-1]
    out = math.sqrt(theta) * stretched
    out[0] = vertex
    out[-1] = 0.0
    return out, theta


def decreasing_rearrange(u: GraphFunction, halfline: str) -> Rearranged:
    """Decreasing rearrangement of u on one half-line, keeping the vertex value.

    Interior samples are sorted in decreasing order.  If the largest of them
    exceeds the vertex value the result is rescaled as sqrt(theta) u*(theta x)
    with theta = (vertex / max)^2, which pins the vertex value and multiplies
    the half-line energy by theta^2.  On a truncated half-line the stretched
    profile is tilted by a linear term so that it still ends at zero; the
    mass can only go down.
    """
    grid = u.grid
    if halfline not in grid.halfline_names:
        raise GraphError(f"unknown half-line {halfline!r}")
    idx = grid.index(halfline)
    a = grid.edge_values(u.values, halfline)
    if np.any(a < 0):
        raise ValueError(f"negative samples on half-line {halfline!r}")
    out, theta = _rearrange_samples(a, grid.x(halfline))
    v = u.values.copy()
    v[idx[1:-1]] = out[1:-1]
    return Rearranged(u.with_values(v), theta)


# -- descent ---------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeReport:
    minimizer: GraphFunction
    energy: float
    lam: float
    residuals: en.Residuals
    core_mass: float
    iterations: int
    converged: bool
    boundary_active: bool
    spec: ConstraintSpec
    stop_reason: str = ""
    polished: bool = False
    energy_history: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "energy": self.energy,
            "lambda": self.lam,
            "lambda_compactness": -self.lam,
            "mass": en.mass(self.minimizer),
            "mass_trapezoid": en.mass(self.minimizer, "trapezoid"),
            "core_mass": self.core_mass,
            "iterations": self.iterations,
            "converged": self.converged,
            "boundary_active": self.boundary_active,
            "polished": self.polished,
            "stop_reason": self.stop_reason,
            "residuals": self.residuals.to_dict(),
            "spec": {"mu": self.spec.mu, "eta": self.spec.eta, "delta": self.spec.delta},
        }


@dataclass
class DescentOptions:
    max_iter: int = 20000
    tol: float = 1e-12
    nls_tol: float = 1e-6
    kirchhoff_tol: float = 1e-3
    sigma: float = 1.0
    polish: bool = True
    check_hypotheses: bool = True


class _Projector:
    """clamp -> rearrange half-lines -> restore mass -> enforce core mass >= eta."""

    def __init__(self, grid: Grid, spec: ConstraintSpec):
        self.grid = grid
        self.mu = spec.mu
        self.eta = spec.eta
        self.w = np.asarray(grid.weights)
        self.w_core = grid.partial_weights(grid.core_names)
        nv = len(grid.graph.vertices)
        core = np.concatenate([np.arange(nv), grid.interior_nodes(grid.core_names)])
        self.core = core.astype(np.intp)
        self.half = grid.interior_nodes(grid.halfline_names)
        self.halfline_idx = [grid.index(h) for h in grid.halfline_names]
        self.halfline_x = [grid.x(h) for h in grid.halfline_names]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.maximum(x, 0.0)
        for idx, xs in zip(self.halfline_idx, self.halfline_x):
            a = np.append(x, 0.0)[idx]
            out, _ = _rearrange_samples(a, xs)
            x[idx[1:-1]] = out[1:-1]
        m = float(self.w @ (x * x))
        if not m > 0:
            raise ConvergenceError("iterate collapsed to zero")
        x *= math.sqrt(self.mu / m)
        mk = float(self.w_core @ (x * x))
        if mk < self.eta * (1 - 1e-14):
            if mk <= 0:
                raise ConvergenceError("core mass vanished; iterate left the admissible set")
            a2 = self.eta / mk
            A = float(self.w[self.core] @ x[self.core] ** 2)
            B = float(self.w[self.half] @ x[self.half] ** 2)
            rest = self.mu - a2 * A
            if B <= 0 or rest < 0:
                raise ConvergenceError("cannot move enough mass into the core; "
                                      "mu is outside the working band")
            x[self.core] *= math.sqrt(a2)
            x[self.half] *= math.sqrt(rest / B)
        return x


def _choose_init(grid: Grid, mu: float) -> GraphFunction:
    g = grid.graph
    tips = set(g.terminal_points)
    pendants = [e for e in g.edges if not e.is_loop and (e.start in tips or e.end in tips)]
    if pendants:
        e = max(pendants, key=lambda e: e.length)
        tip = e.end if e.end in tips else e.start
        sup = MU_HALFLINE
    else:
        if not g.edges:
            raise HypothesisError("graph has no bounded edge")
        e = max(g.edges, key=lambda e: e.length)
        tip = None
        sup = MU_LINE
    target = min(mu, 0.9 * sup)
    w = cutoff_soliton(grid, target, e.name, tip)
    if target != mu:
        w = w.with_values(w.values * math.sqrt(mu / target))
    return w


def default_grid(graph: MetricGraph, h: float = 2.5e-3, halfline_length: float = 20.0,
                 h_halfline: float = 1e-2) -> Grid:
    return Grid.uniform(graph, h, halfline_length=halfline_length, h_halfline=h_halfline)


def minimize(graph: MetricGraph, spec: ConstraintSpec, init: GraphFunction | str = "auto",
             grid: Grid | None = None, options: DescentOptions | None = None) -> MinimizeReport:
    """Projected Sobolev-gradient descent of the energy on A.

    Raises :class:`HypothesisError` when the graph fails the structural
    hypotheses (unless ``options.check_hypotheses`` is off),
    :class:`ConstraintError` for bad constraint data, and
    :class:`UnboundedEnergyError` when the energy runs off to -infinity.
    """
    opts = options or DescentOptions()
    if graph.compact:
        raise GraphError("minimization needs a non-compact graph")
    rep = classify(graph)
    if opts.check_hypotheses:
        hyp = theorem_hypotheses(graph)
        if not hyp["satisfied"]:
            failed = [k for k, ok in hyp["checks"].items() if not ok]
            raise HypothesisError("graph fails the existence hypotheses: " + ", ".join(failed))
        spec.validate(tip=rep.case is Case.CASE1)
    elif not graph.edges:
        raise HypothesisError("graph has no bounded edge")

    if isinstance(init, GraphFunction):
        grid = init.grid
        u0 = init
    else:
        if init != "auto":
            raise ValueError(f"init must be a GraphFunction or 'auto', not {init!r}")
        grid = grid or default_grid(graph)
        u0 = _choose_init(grid, spec.mu)

    F = en.LumpedFunctional(grid)
    proj = _Projector(grid, spec)
    P = (F.K + opts.sigma * sp.diags(F.w)).tocsc()
    solve = spla.factorized(P)
    h = grid.h_min

    x = proj(u0.values.copy())
    E = F.energy(x)
    history = [E]
    tau = 1.0
    reason = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = F.gradient(x)
        wx = F.w * x
        s = solve(g)
        q = solve(wx)
        d = s - (float(wx @ s) / float(wx @ q)) * q
        wk = F.w_core * x
        if F.core_mass(x) <= spec.eta * (1 + 1e-9) and float(wk @ d) > 0:
            # on the boundary and the step -tau d would drain the core:
            # project onto the tangent of both constraints instead
            r = solve(wk)
            G = np.array([[wx @ q, wx @ r], [wk @ q, wk @ r]])
            c = np.linalg.solve(G, np.array([wx @ s, wk @ s]))
            d = s - c[0] * q - c[1] * r
        accepted = False
        while tau > 1e-14:
            y = proj(x - tau * d)
            Ey = F.energy(y)
            if Ey < E:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            reason = "step_underflow"
            break
        dE = E - Ey
        x, E = y, Ey
        history.append(E)
        tau = min(tau * 1.5, 1e3)
        peak = float(np.max(x))
        if E < -1e4 or (E < 0 and spec.mu / peak ** 2 < 5 * h):
            raise UnboundedEnergyError(
                f"energy {E:.4g} with concentration width {spec.mu / peak ** 2:.3g} at the "
                f"grid scale {h:.3g}: the energy is unbounded below at mu={spec.mu:.6g}")
        if dE <= opts.tol * max(abs(E), 1e-3):
            reason = "energy_stalled"
            break

    boundary = F.core_mass(x) <= spec.eta * (1 + 1e-9)
    polished = False
    if opts.polish and not boundary:
        try:
            u_n, _ = en.newton_stationary(GraphFunction(grid, x), target_mass=spec.mu)
            xn = u_n.values
            if (np.min(xn) >= -1e-12 and F.core_mass(xn) >= spec.eta
                    and F.energy(xn) <= E + 1e-9 * max(1.0, abs(E))):
                x = np.maximum(xn, 0.0)
                E = F.energy(x)
                history.append(E)
                polished = True
        except ConvergenceError:
            pass

    u = GraphFunction(grid, x)
    lam = F.multiplier(x)
    res = en.residuals(u, lam)
    core = en.core_mass(u)
    stationary = res.nls_residual < opts.nls_tol and res.kirchhoff_residual < opts.kirchhoff_tol
    converged = reason in ("energy_stalled", "step_underflow") and stationary and \
        F.core_mass(x) >= spec.eta * (1 - 1e-12)
    return MinimizeReport(u, en.energy(u), lam, res, core, it, converged, boundary, spec,
                          reason, polished, history)


# -- certificate --------------------------------------------------------------------

def certify(report: MinimizeReport, *, nls_tol: float = 1e-6, kirchhoff_tol: float = 1e-3,
            vertex_floor: float = 1e-8, morse: bool = False) -> dict[str, Any]:
    """Check the numerical signature of a local minimizer; returns JSON-ready dict."""
    r = report.residuals
    u = report.minimizer
    grid = u.grid
    nv = len(grid.graph.vertices)
    clauses = {
        "converged": report.converged,
        "nls_residual": r.nls_residual < nls_tol,
        "kirchhoff_residual": r.kirchhoff_residual < kirchhoff_tol,
        "vertex_positivity": float(np.min(u.values[:nv])) > vertex_floor,
        # u'' + u^5 = lam u with lam > 0; the compactness convention has -lam < 0
        "multiplier_sign": report.lam > 0,
        "core_mass": en.mass(u, "trapezoid") > 0 and
        float(grid.partial_weights(grid.core_names) @ u.values ** 2) >= report.spec.eta * (1 - 1e-10),
    }
    out: dict[str, Any] = {
        "clauses": clauses,
        "values": {
            "nls_residual": r.nls_residual,
            "kirchhoff_residual": r.kirchhoff_residual,
            "vertex_min": float(np.min(u.values[:nv])),
            "lambda": report.lam,
            "lambda_compactness": -report.lam,
            "core_mass": report.core_mass,
            "eta": report.spec.eta,
        },
        "tolerances": {"nls": nls_tol, "kirchhoff": kirchhoff_tol, "vertex_floor": vertex_floor},
    }
    if morse:
        from graphnls.spectral import discrete_morse_index
        idx = discrete_morse_index(u, report.lam)
        out["values"]["morse_index"] = idx
        clauses["morse_index"] = idx == 1
    failed = [k for k, ok in clauses.items() if not ok]
    out["status"] = "PASS" if not failed else "FAILED"
    out["failed"] = failed
    return out


def certificate_json(cert: dict[str, Any]) -> str:
    return json.dumps(cert, sort_keys=True, indent=2)
