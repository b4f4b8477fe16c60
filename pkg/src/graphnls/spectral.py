"""Low spectrum of the linearization around a positive stationary state.

For u'' + u^5 = omega u the linearization splits into two real operators

    L_real v = -v'' - 5 u^4 v + omega v,
    L_imag v = -v'' -   u^4 v + omega v,

with Kirchhoff coupling at the vertices.  In the P1 / lumped discretization
the generalized problem (K + W(omega - c u^4)) v = nu W v becomes the
symmetric matrix W^-1/2 K W^-1/2 + diag(omega - c u^4), whose eigenvectors are
W^1/2 v.  L_imag u = 0 exactly when u is a discrete stationary state.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from graphnls import energy as en
from graphnls import model
from graphnls.errors import ConvergenceError, GraphError
from graphnls.grid import GraphFunction

SIGN_TOL = 1e-6
SLOPE_TOL = 1e-7
DENSE_LIMIT = 1500


class Block(str, Enum):
    REAL = "real"
    IMAG = "imag"

    @property
    def power(self) -> int:
        return 5 if self is Block.REAL else 1


@dataclass(frozen=True)
class LinearizedOperator:
    grid: Any
    block: Block
    potential: np.ndarray  # c u^4 at the nodes
    omega: float
    matrix: sp.csr_matrix = field(repr=False)  # symmetric form
    _sqrt_w: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.potential.size

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Action of the operator on nodal values (W^-1 K v + (omega - c u^4) v)."""
        K = self.grid.stiffness
        w = self._sqrt_w ** 2
        return (K @ v) / w + (self.omega - self.potential) * v

    def quadratic_form(self, v: np.ndarray) -> float:
        """<L v, v> in the lumped inner product."""
        K = self.grid.stiffness
        w = self._sqrt_w ** 2
        return float(v @ (K @ v) + w @ ((self.omega - self.potential) * v * v))

    def to_nodal(self, y: np.ndarray) -> np.ndarray:
        return y / self._sqrt_w[:, None] if y.ndim == 2 else y / self._sqrt_w


def assemble(u: GraphFunction, omega: float, block: Block | str) -> LinearizedOperator:
    block = Block(block)
    grid = u.grid
    w = np.asarray(grid.weights)
    if np.any(w <= 0):
        raise GraphError("grid has a node with zero lumped weight")
    s = np.sqrt(w)
    pot = block.power * u.values ** 4
    Dinv = sp.diags(1.0 / s)
    A = (Dinv @ grid.stiffness @ Dinv + sp.diags(omega - pot)).tocsr()
    # exact symmetry: average with the transpose (removes last-bit asymmetry)
    A = ((A + A.T) * 0.5).tocsr()
    return LinearizedOperator(grid, block, pot, float(omega), A, s)


def eigs(op: LinearizedOperator, k: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """The k algebraically smallest eigenpairs; vectors are nodal values."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = op.size
    k = min(k, n)
    if n <= DENSE_LIMIT or k >= n - 1:
        vals, vecs = la.eigh(op.matrix.toarray(), subset_by_index=(0, k - 1))
    else:
        shift = op.omega - float(np.max(op.potential)) - 1.0
        try:
            vals, vecs = spla.eigsh(op.matrix.tocsc(), k=k, sigma=shift, which="LM",
                                    tol=1e-12, v0=np.ones(n))
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise ConvergenceError(f"eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return vals, op.to_nodal(vecs)


def cosine(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    """|<u, v>_W| / (|u|_W |v|_W)."""
    return abs(float(w @ (u * v))) / math.sqrt(float(w @ (u * u)) * float(w @ (v * v)))


def morse_index(vals: np.ndarray, tol: float = SIGN_TOL) -> int:
    return int(np.sum(vals < -tol))


def discrete_morse_index(u: GraphFunction, omega: float, k: int = 6,
                         tol: float = SIGN_TOL) -> int:
    """Negative eigenvalues of the real block around ``u`` (k must exceed the index)."""
    vals, _ = eigs(assemble(u, omega, Block.REAL), k)
    return morse_index(vals, tol)


@dataclass(frozen=True)
class SpectrumReport:
    z: float
    n: int
    omega: float
    eigenvalues: list[float]
    imag_eigenvalues: list[float]
    morse_index: int
    imag_morse_index: int
    kernel_gap: float
    kernel_cosine: float
    form_at_profile: float
    form_expected: float
    mu_prime: float
    d_second_sign: int
    gss_stable: bool
    verdict: str
    unknowns: int
    refined: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def slope_sign(mu_prime: float, tol: float = SLOPE_TOL) -> int:
    if abs(mu_prime) < tol:
        return 0
    return 1 if mu_prime > 0 else -1


def profile_spectrum(u: GraphFunction, omega: float, k: int = 6) -> dict[str, Any]:
    """Both blocks around a given profile, plus kernel and quadratic-form checks."""
    w = np.asarray(u.grid.weights)
    real = assemble(u, omega, Block.REAL)
    imag = assemble(u, omega, Block.IMAG)
    rv, _ = eigs(real, k)
    iv, ivec = eigs(imag, max(2, min(k, 3)))
    return {
        "real": rv,
        "imag": iv,
        "kernel_cosine": cosine(ivec[:, 0], u.values, w),
        "form_at_profile": real.quadratic_form(u.values),
        "form_expected": -4.0 * float(w @ u.values ** 6),
    }


def gss_verdict(z: float, n: int = 0, *, k: int = 6, pendant_cells: int = 2000,
                halfline_cells: int = 2000, refine: bool = True) -> SpectrumReport:
    """Morse index, kernel check and slope criterion for the model member u_z.

    With ``refine`` the sampled profile is first corrected by Newton's method
    to the discrete stationary state with the same omega, so the kernel of
    the imaginary block is exact up to solver tolerance.
    """
    sol = model.build_profile(z, n, pendant_cells=pendant_cells, halfline_cells=halfline_cells)
    u = sol.profile
    if refine:
        u, _ = en.newton_stationary(u, omega=sol.omega)
    spec = profile_spectrum(u, sol.omega, k)
    morse = morse_index(spec["real"])
    mu_p = model.mass_derivative(z, n)
    sign = slope_sign(mu_p)
    stable = morse == 1 and sign > 0
    if sign == 0:
        verdict = "indeterminate"
    else:
        verdict = "stable" if stable else "unstable"
    iv = spec["imag"]
    return SpectrumReport(
        z=z, n=n, omega=sol.omega,
        eigenvalues=[float(v) for v in spec["real"]],
        imag_eigenvalues=[float(v) for v in iv],
        morse_index=morse,
        imag_morse_index=morse_index(iv),
        kernel_gap=float(abs(iv[0])),
        kernel_cosine=spec["kernel_cosine"],
        form_at_profile=spec["form_at_profile"],
        form_expected=spec["form_expected"],
        mu_prime=mu_p,
        d_second_sign=sign,
        gss_stable=stable,
        verdict=verdict,
        unknowns=u.grid.n_nodes,
        refined=refine,
    )
