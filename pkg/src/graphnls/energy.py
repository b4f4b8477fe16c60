"""Energy, mass, residuals and Gagliardo-Nirenberg diagnostics on graphs.

Two discretizations live here.  The *reporting* quantities (:func:`energy`,
:func:`mass`, ...) use composite Simpson per edge with second-order
finite-difference derivatives.  :class:`LumpedFunctional` is the P1 /
trapezoid functional whose exact gradient drives the minimizer and whose
Hessian is the discrete linearized operator.

Multipliers follow the convention u'' + u^5 = lambda u, so stationary states
decaying on half-lines have lambda > 0 (lambda = Lambda^2 / 3 on the model
family).  The compactness argument writes -u'' = lambda u + u^5 instead; its
multiplier is the negative of the one returned here.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import simpson

from graphnls.errors import ConvergenceError, GraphError
from graphnls.grid import GraphFunction, Grid


def _simpson(u: GraphFunction, name: str, fn) -> float:
    x, y = u.edge(name)
    return float(simpson(fn(y, u.grid.step(name)), x=x))


def _sq(y, h):
    return y * y


def _sixth(y, h):
    return y ** 6


def _grad_sq(y, h):
    return np.gradient(y, h, edge_order=2) ** 2


def mass_on(u: GraphFunction, names: Iterable[str]) -> float:
    """Simpson integral of u^2 over the listed edges / half-lines."""
    total = 0.0
    for name in names:
        if name not in u.grid.spans:
            raise GraphError(f"unknown edge {name!r}")
        total += _simpson(u, name, _sq)
    return total


def mass(u: GraphFunction, rule: str = "simpson") -> float:
    if rule == "simpson":
        return mass_on(u, u.grid.names)
    if rule == "trapezoid":
        return float(u.grid.weights @ u.values ** 2)
    raise ValueError(f"unknown rule {rule!r}")


def core_mass(u: GraphFunction) -> float:
    return mass_on(u, u.grid.core_names)


def kinetic(u: GraphFunction, names: Iterable[str] | None = None) -> float:
    """Integral of |u'|^2."""
    names = u.grid.names if names is None else names
    return sum(_simpson(u, n, _grad_sq) for n in names)


def potential(u: GraphFunction, names: Iterable[str] | None = None) -> float:
    """Integral of u^6."""
    names = u.grid.names if names is None else names
    return sum(_simpson(u, n, _sixth) for n in names)


def energy(u: GraphFunction, names: Iterable[str] | None = None) -> float:
    """NLS energy  1/2 int |u'|^2 - 1/6 int |u|^6 (optionally on a subgraph)."""
    names = list(u.grid.names if names is None else names)
    return 0.5 * kinetic(u, names) - potential(u, names) / 6.0


@dataclass(frozen=True)
class GNCheck:
    lhs: float
    rhs: float
    satisfied: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0


def gn_check(u: GraphFunction, mu_G: float, slack: float = 1e-8) -> GNCheck:
    """Gagliardo-Nirenberg: int u^6 <= 3/mu_G^2 (int u^2)^2 int |u'|^2."""
    lhs = potential(u)
    rhs = 3.0 / mu_G ** 2 * mass(u) ** 2 * kinetic(u)
    return GNCheck(lhs, rhs, lhs <= rhs * (1 + slack) + 1e-300)


def lagrange_multiplier(u: GraphFunction) -> float:
    """Multiplier (int u^6 - int |u'|^2) / int u^2 of u'' + u^5 = lambda u."""
    m = mass(u)
    if m <= 0:
        raise ValueError("zero mass")
    return (potential(u) - kinetic(u)) / m


@dataclass(frozen=True)
class Residuals:
    nls_residual: float
    kirchhoff_residual: float
    positivity_min: float
    vertex_min: float

    def to_dict(self):
        return asdict(self)


def _outward_derivative(y: np.ndarray, h: float, at_start: bool) -> float:
    """Second-order one-sided derivative pointing into the edge."""
    if at_start:
        return (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h)
    return (-3 * y[-1] + 4 * y[-2] - y[-3]) / (2 * h)


def residuals(u: GraphFunction, lam: float) -> Residuals:
    """Pointwise defects of u'' + u^5 = lam u and of the Kirchhoff balance."""
    grid = u.grid
    nls = 0.0
    for name in grid.names:
        _, y = u.edge(name)
        h = grid.step(name)
        d2 = (y[2:] - 2 * y[1:-1] + y[:-2]) / h ** 2
        r = d2 + y[1:-1] ** 5 - lam * y[1:-1]
        if r.size:
            nls = max(nls, float(np.max(np.abs(r))))
    kir = 0.0
    for v in grid.graph.vertices:
        total = 0.0
        for name, at_start in grid.vertex_ends(v):
            _, y = u.edge(name)
            total += _outward_derivative(y, grid.step(name), at_start)
        kir = max(kir, float(abs(total)))
    nv = len(grid.graph.vertices)
    return Residuals(nls, kir, float(np.min(u.values)), float(np.min(u.values[:nv])))


# -- lumped functional ------------------------------------------------------------

class LumpedFunctional:
    """E_h(u) = 1/2 u.K.u - 1/6 sum w u^6 with mass sum w u^2 (trapezoid)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.K = grid.stiffness
        self.w = np.asarray(grid.weights)
        self.w_core = grid.partial_weights(grid.core_names)
        self.w_half = grid.partial_weights(grid.halfline_names)

    def energy(self, u: np.ndarray) -> float:
        return 0.5 * float(u @ (self.K @ u)) - float(self.w @ u ** 6) / 6.0

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.K @ u - self.w * u ** 5

    def mass(self, u: np.ndarray) -> float:
        return float(self.w @ (u * u))

    def core_mass(self, u: np.ndarray) -> float:
        return float(self.w_core @ (u * u))

    def multiplier(self, u: np.ndarray) -> float:
        """Discrete Rayleigh-type multiplier in the u'' + u^5 = lambda u convention."""
        return (float(self.w @ u ** 6) - float(u @ (self.K @ u))) / self.mass(u)

    def hessian(self, u: np.ndarray, omega: float, power: int = 5) -> sp.csr_matrix:
        """K + W (omega - power u^4): the unsymmetrized linearization."""
        return (self.K + sp.diags(self.w * (omega - power * u ** 4))).tocsr()


def newton_stationary(u: GraphFunction, *, omega: float | None = None,
                      target_mass: float | None = None, tol: float = 1e-12,
                      max_iter: int = 50) -> tuple[GraphFunction, float]:
    """Solve the discrete stationary equations K u + W (lam u - u^5) = 0.

    Exactly one of ``omega`` (fixed multiplier) or ``target_mass`` (multiplier
    is an unknown, lumped mass fixed) must be given.  Returns the solution and
    its multiplier.
    """
    if (omega is None) == (target_mass is None):
        raise ValueError("give exactly one of omega / target_mass")
    F = LumpedFunctional(u.grid)
    x = u.values.copy()
    lam = omega if omega is not None else F.multiplier(x)
    n = x.size
    absK = abs(F.K)
    # size of the individual terms, so the test sits above the roundoff floor
    scale = float(np.max(absK @ np.abs(x) + F.w * (abs(lam) * np.abs(x) + np.abs(x) ** 5)))
    for _ in range(max_iter):
        r = F.K @ x + F.w * (lam * x - x ** 5)
        J = F.hessian(x, lam)
        if omega is not None:
            res = float(np.max(np.abs(r)))
            if res <= tol * scale:
                return u.with_values(x), lam
            x = x - spla.spsolve(J.tocsc(), r)
        else:
            g = F.mass(x) - target_mass
            res = max(float(np.max(np.abs(r))), abs(g))
            if res <= tol * scale:
                return u.with_values(x), lam
            wx = (F.w * x)[:, None]
            A = sp.bmat([[J, sp.csr_matrix(wx)], [sp.csr_matrix(2 * wx.T), None]]).tocsc()
            step = spla.spsolve(A, np.concatenate([r, [g]]))
            x = x - step[:n]
            lam = lam - step[n]
        if not np.all(np.isfinite(x)):
            break
    raise ConvergenceError("Newton iteration for the discrete stationary state did not converge")
