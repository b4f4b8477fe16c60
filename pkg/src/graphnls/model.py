"""Explicit stationary states on the tip graph (two half-lines + unit pendant).

Each member u_z of the family is glued from two soliton tails on the
half-lines and a Hamiltonian orbit on the pendant.  Everything depends on
the single parameter z = Lambda * y through the rescaled quantities

    phi* = cosh(2z/sqrt3)^(-1/2),   H* = phi*^2 (1 - phi*^4) / 2,
    uM*  = the root > 1 of  u^6 - u^2 = 6 H*,

and the pendant travel time fixes Lambda(z).  Integrals are taken in the
rescaled variable v = u / sqrt(Lambda), where the orbit is
v'^2 / 2 + v^6 / 6 - v^2 / 6 = H*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from graphnls import energy as en
from graphnls.constants import MU_HALFLINE, MU_LINE, SQRT3
from graphnls.errors import ModelError
from graphnls.graph import tip_graph
from graphnls.grid import GraphFunction, Grid
from graphnls.quadrature import integrate_smooth, integrate_sqrt_singular

MODEL_GRAPH = tip_graph(1.0)
PENDANT = "pendant"
HALFLINES = ("h_plus", "h_minus")

#: absolute quadrature tolerance for the rescaled integrals
QUAD_TOL = 1e-13


def soliton(Lambda: float, x):
    """phi_Lambda(x) = sqrt(Lambda) cosh(2 Lambda x / sqrt3)^(-1/2)."""
    if not Lambda > 0:
        raise ValueError("Lambda must be positive")
    t = 2.0 * Lambda * np.abs(np.asarray(x, dtype=float)) / SQRT3
    # sech written with exp(-t) so that large arguments underflow cleanly
    e = np.exp(-t)
    return math.sqrt(Lambda) * np.sqrt(2.0 * e / (1.0 + e * e))


def soliton_slope(Lambda: float, x):
    """Derivative of :func:`soliton` with respect to x."""
    t = 2.0 * Lambda * np.asarray(x, dtype=float) / SQRT3
    return -(Lambda ** 1.5 / SQRT3) * np.tanh(t) * np.sqrt(1.0 / np.cosh(t))


@dataclass(frozen=True)
class StarredQuantities:
    z: float
    phi_star: float
    H_star: float
    uM_star: float
    #: uM*^4 - 1, kept separately because it underflows to noise at large z
    uM4_minus_one: float

    def poly(self, v):
        """6 H* - v^6 + v^2, factored as (uM*^2 - v^2)(uM*^4 - 1 + uM*^2 v^2 + v^4)."""
        b = self.uM_star
        v = np.asarray(v, dtype=float)
        return (b - v) * (b + v) * (self.uM4_minus_one + b * b * v * v + v ** 4)


@lru_cache(maxsize=4096)
def starred(z: float) -> StarredQuantities:
    """Rescaled junction data; uM* found by safeguarded Newton on d = uM* - 1."""
    if not z > 0:
        raise ValueError("z must be positive")
    t = 2.0 * z / SQRT3
    e = math.exp(-t)
    sech = 2.0 * e / (1.0 + e * e)
    phi = math.sqrt(sech)
    phi4 = sech * sech
    six_h = 3.0 * sech * (1.0 - phi4)  # 6 H*

    def q(d):  # (1+d)^4 - 1 without cancellation
        return d * (4.0 + d * (6.0 + d * (4.0 + d)))

    def g(d):
        return (1.0 + d) ** 2 * q(d) - six_h

    def dg(d):
        return 2.0 * (1.0 + d) * q(d) + (1.0 + d) ** 2 * (4.0 + d * (12.0 + d * (12.0 + 4.0 * d)))

    lo, hi = 0.0, (six_h + 2.0) ** (1.0 / 6.0)
    d = min(six_h / 4.0, 0.5 * hi)
    for _ in range(200):
        gd = g(d)
        if gd > 0:
            hi = d
        else:
            lo = d
        step = gd / dg(d)
        nd = d - step
        if not lo < nd < hi:
            nd = 0.5 * (lo + hi)
        if abs(nd - d) <= 1e-13 * max(d, 1e-300) or hi - lo <= 1e-13 * max(d, 1e-300):
            d = nd
            break
        d = nd
    else:
        raise ModelError(f"root finder for uM* did not converge at z={z}")
    return StarredQuantities(z, phi, 0.5 * sech * (1.0 - phi4), 1.0 + d, q(d))


@dataclass(frozen=True)
class FamilyIntegrals:
    """All rescaled integrals at one z (see :func:`family_integrals`)."""

    starred: StarredQuantities
    travel: float        # sqrt3 int_{phi*}^{uM*} dv / sqrt(P)   (= Lambda_0)
    half_period: float   # T*/2 = sqrt3 int_{-uM*}^{uM*} dv / sqrt(P)
    pendant_mass: float  # sqrt3 int_{phi*}^{uM*} v^2 dv / sqrt(P)
    rotation_mass: float  # M* = sqrt3 int_{-uM*}^{uM*} v^2 dv / sqrt(P)
    line_mass: float     # int_{|x|>z} sech(2x/sqrt3) dx

    def Lambda(self, n: int = 0) -> float:
        return self.travel + (n * self.half_period if n else 0.0)

    def mu(self, n: int = 0) -> float:
        return self.line_mass + self.pendant_mass + (n * self.rotation_mass if n else 0.0)


def line_mass(z: float) -> float:
    """Closed form  sqrt3 (pi/2 - gd(2z/sqrt3)) = 2 sqrt3 arctan(exp(-2z/sqrt3))."""
    return 2.0 * SQRT3 * math.atan(math.exp(-2.0 * z / SQRT3))


def line_mass_quadrature(z: float, tol: float = QUAD_TOL) -> float:
    # sech(2x/sqrt3) < 1e-30 beyond z + 80
    r = integrate_smooth(lambda x: 1.0 / np.cosh(2.0 * x / SQRT3), z, z + 80.0, tol / 2)
    return 2.0 * r.value


@lru_cache(maxsize=4096)
def family_integrals(z: float, *, with_rotation: bool = True) -> FamilyIntegrals:
    s = starred(z)
    b, q = s.uM_star, s.uM4_minus_one
    # the travel time grows like z, so keep the tolerance relative at large z
    tol = QUAD_TOL * max(1.0, z)

    def quartic(v):  # P(v) / (uM*^2 - v^2), positive on the whole orbit
        return q + b * b * v * v + v ** 4

    def inv_r(v):  # sqrt3 / sqrt(P) with the (uM* - v) factor taken out
        return SQRT3 / np.sqrt((b + v) * quartic(v))

    def sq_r(v):
        return v * v * inv_r(v)

    def inv_full(v):
        return inv_r(v) / np.sqrt(b - v)

    def sq_full(v):
        return v * v * inv_full(v)

    def orbit_integral(full, reduced, lo, tol_):
        # the t^2 map only on the upper half: near v ~ 0 the map b - t^2 would
        # throw away the relative precision of v, and at large z the quartic
        # nearly vanishes there (the orbit grazes the saddle point)
        c = 0.5 * (lo + b)
        return (integrate_smooth(full, lo, c, tol_ / 2).value
                + integrate_sqrt_singular(reduced, c, b, "right", tol_ / 2, factored=True).value)

    # regular at phi* (the slope there is nonzero); singular at uM* only
    travel = orbit_integral(inv_full, inv_r, s.phi_star, tol)
    pend = orbit_integral(sq_full, sq_r, s.phi_star, tol)
    if with_rotation:
        # even integrands: twice the integral over [0, uM*]
        half = 2.0 * orbit_integral(inv_full, inv_r, 0.0, tol / 2)
        rot = 2.0 * orbit_integral(sq_full, sq_r, 0.0, tol / 2)
    else:
        half = rot = math.nan
    return FamilyIntegrals(s, travel, half, pend, rot, line_mass(z))


def lambda_of(z: float, n: int = 0) -> float:
    """Lambda_n(z): travel time from phi* to uM* plus n half rotations."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return family_integrals(z, with_rotation=n > 0).Lambda(n)


def mass_of(z: float, n: int = 0, *, check_line: bool = False) -> float:
    """Total mass mu_n(z) = line tails + pendant + n M*."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    fi = family_integrals(z, with_rotation=n > 0)
    if check_line:
        q = line_mass_quadrature(z)
        if abs(q - fi.line_mass) > 1e-10:
            raise ModelError(f"line mass mismatch at z={z}: {q} vs {fi.line_mass}")
    return fi.mu(n)


def mass_derivative(z: float, n: int = 0, h: float = 1e-2) -> float:
    """d mu_n / dz: 5-point central difference, one Richardson halving."""
    h = min(h, z / 4.0)

    def d(hh):
        f = lambda t: mass_of(t, n)  # noqa: E731
        return (-f(z + 2 * hh) + 8 * f(z + hh) - 8 * f(z - hh) + f(z - 2 * hh)) / (12 * hh)

    return (16.0 * d(h / 2) - d(h)) / 15.0


# -- profiles -------------------------------------------------------------------

def model_grid(Lambda: float, pendant_cells: int = 2000, halfline_cells: int = 2000,
               halfline_span: float = 50.0) -> Grid:
    """Grid on the tip graph; half-lines cut at ``halfline_span / Lambda``.

    A span of 50 in the rescaled variable puts the soliton tail below 1e-12
    of its peak for every z.
    """
    cells = {PENDANT: pendant_cells, **{h: halfline_cells for h in HALFLINES}}
    return Grid(MODEL_GRAPH, cells, halfline_span / Lambda)


def _pendant_rhs(_s, y):
    v, dv = y
    return [dv, v / 3.0 - v ** 5]


def integrate_pendant(z: float, Lambda: float, s_eval: np.ndarray):
    """Integrate the rescaled orbit from the junction data up to s = Lambda."""
    st = starred(z)
    v0 = st.phi_star
    dv0 = 2.0 / SQRT3 * v0 * math.sqrt(1.0 - v0 ** 4)
    sol = solve_ivp(_pendant_rhs, (0.0, Lambda), [v0, dv0], method="DOP853",
                    t_eval=s_eval, rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise ModelError(f"pendant ODE failed at z={z}: {sol.message}")
    return sol.y[0], sol.y[1]


@dataclass(frozen=True)
class ModelSolution:
    z: float
    n: int
    Lambda: float
    omega: float
    mu: float
    energy: float
    profile: GraphFunction
    H_of_y: float
    uM: float
    starred: StarredQuantities
    y: float
    #: rescaled pendant orbit (v, dv/ds) at the grid nodes
    orbit: tuple[np.ndarray, np.ndarray] = field(repr=False)

    @property
    def hamiltonian_drift(self) -> float:
        v, dv = self.orbit
        H = 0.5 * dv ** 2 + v ** 6 / 6.0 - v ** 2 / 6.0
        return float(np.max(np.abs(H - self.starred.H_star)) / self.starred.H_star)

    @property
    def junction_slope(self) -> float:
        """Pendant derivative at the junction, 2 |phi_Lambda'(y)|."""
        return self.Lambda ** 1.5 * float(self.orbit[1][0])

    @property
    def tip_slope(self) -> float:
        return self.Lambda ** 1.5 * float(self.orbit[1][-1])

    def sample(self, grid: Grid, *, pendant: str = PENDANT,
               halflines: tuple[str, str] | None = None) -> GraphFunction:
        """Evaluate this solution on another grid of a tip graph (pendant length 1)."""
        g = grid.graph
        e = g.edge(pendant)
        if abs(e.length - 1.0) > 1e-12:
            raise ModelError("the model family lives on a unit pendant")
        tip = g.terminal_points
        if e.end in tip:
            xs = grid.x(pendant)
        elif e.start in tip:
            xs = 1.0 - grid.x(pendant)
        else:
            raise ModelError(f"edge {pendant!r} does not end at a terminal point")
        v, _ = integrate_pendant(self.z, self.Lambda, np.sort(self.Lambda * xs))
        if xs[0] > xs[-1]:
            v = v[::-1]
        arrays = {pendant: math.sqrt(self.Lambda) * v}
        for h in (halflines or tuple(g.halfline_names)):
            u = soliton(self.Lambda, grid.x(h) + self.y)
            u[-1] = 0.0
            arrays[h] = u
        return GraphFunction.from_edge_arrays(grid, arrays, atol=1e-9)


def build_profile(z: float, n: int = 0, *, pendant_cells: int = 2000,
                  halfline_cells: int = 2000, halfline_span: float = 50.0,
                  tip_tol: float = 1e-6) -> ModelSolution:
    """Glue soliton tails and the pendant orbit into a discretized u_z."""
    Lam = lambda_of(z, n)
    st = starred(z)
    y = z / Lam
    grid = model_grid(Lam, pendant_cells, halfline_cells, halfline_span)
    xs = grid.x(PENDANT)
    v, dv = integrate_pendant(z, Lam, Lam * xs)
    if abs(dv[-1]) > tip_tol:
        raise ModelError(f"tip derivative {dv[-1]:.3e} (rescaled) at z={z}, n={n}: "
                         "Lambda inconsistent with the Kirchhoff condition")
    arrays = {PENDANT: math.sqrt(Lam) * v}
    for h in HALFLINES:
        u = soliton(Lam, grid.x(h) + y)
        u[-1] = 0.0
        arrays[h] = u
    profile = GraphFunction.from_edge_arrays(grid, arrays, atol=1e-9)
    return ModelSolution(
        z=z, n=n, Lambda=Lam, omega=Lam ** 2 / 3.0, mu=mass_of(z, n),
        energy=en.energy(profile), profile=profile, H_of_y=Lam ** 3 * st.H_star,
        uM=math.sqrt(Lam) * st.uM_star, starred=st, y=y, orbit=(v, dv),
    )


# -- mass curve -----------------------------------------------------------------

@dataclass(frozen=True)
class MassCurve:
    z: np.ndarray
    Lambda: np.ndarray
    mu: np.ndarray
    mu_prime: np.ndarray
    n: int
    z_at_min: float
    mu_min: float
    #: True when the minimum was refined inside the range, not at an endpoint
    interior_min: bool

    @property
    def band(self) -> tuple[float, float]:
        """[mu_min, (n+1) mu_R): masses reached by the family (upper end is the z -> 0 limit)."""
        return (self.mu_min, (self.n + 1) * MU_LINE)

    @property
    def local_minima(self) -> int:
        m = self.mu
        return int(np.sum((m[1:-1] < m[:-2]) & (m[1:-1] < m[2:])))

    def rows(self):
        return zip(self.z, self.Lambda, self.mu, self.mu_prime)


def _sample(args):
    z, n = args
    return lambda_of(z, n), mass_of(z, n), mass_derivative(z, n)


def mass_curve(z_lo: float, z_hi: float, samples: int, n: int = 0, *,
               workers: int = 1) -> MassCurve:
    """Sample z -> (Lambda, mu, mu') and locate the minimum of mu."""
    if not 0 < z_lo < z_hi:
        raise ValueError("need 0 < z_lo < z_hi")
    if samples < 2:
        raise ValueError("need at least two samples")
    zs = np.linspace(z_lo, z_hi, samples)
    jobs = [(float(z), n) for z in zs]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_sample, jobs, chunksize=8))
    else:
        out = [_sample(j) for j in jobs]
    lam, mu, dmu = (np.array(col) for col in zip(*out))
    i = int(np.argmin(mu))
    if 0 < i < samples - 1:
        res = minimize_scalar(lambda t: mass_of(t, n), bracket=(zs[i - 1], zs[i], zs[i + 1]),
                              method="golden", tol=1e-10)
        z_min, mu_min, interior = float(res.x), float(res.fun), True
        if mu_min > mu[i]:
            z_min, mu_min = float(zs[i]), float(mu[i])
    else:
        z_min, mu_min, interior = float(zs[i]), float(mu[i]), False
    return MassCurve(zs, lam, mu, dmu, n, z_min, mu_min, interior)


def matching_z(mu: float, n: int = 0, z_lo: float = 0.05, z_hi: float = 30.0,
               branch: str = "stable") -> float:
    """z on the increasing (``stable``) or decreasing branch with mu_n(z) = mu."""
    from scipy.optimize import brentq

    curve = mass_curve(z_lo, min(z_hi, 12.0), 60, n)
    zm = curve.z_at_min
    if mu < curve.mu_min:
        raise ModelError(f"mass {mu} is below the family minimum {curve.mu_min:.6f}")
    f = lambda t: mass_of(t, n) - mu  # noqa: E731
    if branch == "stable":
        if f(z_hi) < 0:
            raise ModelError(f"mass {mu} not reached on the increasing branch up to z={z_hi}")
        return brentq(f, zm, z_hi, xtol=1e-13)
    if f(z_lo) < 0:
        raise ModelError(f"mass {mu} not reached on the decreasing branch down to z={z_lo}")
    return brentq(f, z_lo, zm, xtol=1e-13)


__all__ = [
    "MU_HALFLINE", "MU_LINE", "MODEL_GRAPH", "soliton", "starred", "lambda_of", "mass_of",
    "mass_derivative", "build_profile", "mass_curve", "matching_z", "ModelSolution",
    "MassCurve", "StarredQuantities",
]
