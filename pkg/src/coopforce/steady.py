"""Steady-state solution of the master equation and the derived observables.

The primary solver replaces the least diagonally dominant row of the
generator with the unit-trace constraint and solves the bordered sparse
system with a direct LU factorization.  A shift-inverted eigensolve
targeting the zero eigenvalue backs it up when the direct solve is
ill-conditioned, and a two-eigenvalue probe distinguishes a unique steady
state from a degenerate null space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators as ops

TIER_EXACT = "exact"
TIER_RATE = "rate_equation"
TIER_TRAJECTORY = "trajectory"
TIER_ANALYTIC = "analytic_n2"

#: second-smallest eigenvalue below this fraction of the spectral scale
#: means the stationary state is not unique
DEGENERACY_RTOL = 1e-10
RESIDUAL_RTOL = 1e-8


class DegenerateSteadyStateError(RuntimeError):
    """The generator has more than one stationary state."""


class SteadyStateConvergenceError(RuntimeError):
    """Neither the direct nor the fallback solver produced a valid state."""


@dataclass(frozen=True)
class SteadyStateResult:
    """Solved stationary state with its polarization and solve diagnostics."""

    rho: np.ndarray
    sx: float
    residual: float
    solver_tier: str


def spectral_norm_estimate(lv: sp.spmatrix, iters: int = 20) -> float:
    """Largest singular value of the generator by power iteration on L+L.

    Deterministic start vector so repeated runs agree bit-for-bit.
    """
    d = lv.shape[0]
    x = np.full(d, 1.0 / np.sqrt(d), dtype=complex)
    lh = lv.conj().T.tocsr()
    s = 0.0
    for _ in range(iters):
        y = lh @ (lv @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        x = y / nrm
        s = nrm
    return float(np.sqrt(s))


def _least_dominant_row(lv: sp.csr_matrix) -> int:
    """Row index minimizing |diag| - sum(|offdiag|)."""
    a = abs(lv)
    row_sums = np.asarray(a.sum(axis=1)).ravel()
    diag = np.abs(lv.diagonal())
    return int(np.argmin(2.0 * diag - row_sums))


def _bordered_solve(lv: sp.csr_matrix, row: int, weight: float) -> np.ndarray:
    d2 = lv.shape[0]
    d = int(round(np.sqrt(d2)))
    trace_cols = np.arange(d) * (d + 1)
    mask = np.ones(d2)
    mask[row] = 0.0
    lt = sp.diags(mask) @ lv
    border = sp.csr_matrix(
        (np.full(d, weight, dtype=complex), (np.full(d, row), trace_cols)),
        shape=(d2, d2),
    )
    lt = (lt + border).tocsc()
    rhs = np.zeros(d2, dtype=complex)
    rhs[row] = weight
    lu = spla.splu(lt)
    return lu.solve(rhs)


def _smallest_eigenpairs(lv: sp.csr_matrix, scale: float):
    """Two eigenvalues of smallest magnitude (and the first eigenvector)."""
    d2 = lv.shape[0]
    if d2 <= 256:
        m = lv.toarray()
        w, v = np.linalg.eig(m)
        order = np.argsort(np.abs(w))
        return w[order[0]], w[order[1]], v[:, order[0]]
    sigma = 1e-6 * scale if scale > 0 else 1e-12
    w, v = spla.eigs(lv.tocsc(), k=2, sigma=sigma, which="LM")
    order = np.argsort(np.abs(w))
    return w[order[0]], w[order[1]], v[:, order[0]]


def _finalize(x: np.ndarray):
    rho = ops.unvec(x)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-300:
        raise SteadyStateConvergenceError("candidate steady state has zero trace")
    return rho / tr


def steady_state(lv: sp.spmatrix, observable=None) -> SteadyStateResult:
    """Solve L rho = 0 for the unique unit-trace stationary state.

    ``observable`` defaults to the collective x polarization of the
    register inferred from the generator dimension.
    """
    lv = lv.tocsr()
    d2 = lv.shape[0]
    d = int(round(np.sqrt(d2)))
    n = int(round(np.log2(d)))
    if 4**n != d2:
        raise ValueError("generator dimension is not 4**n")
    if observable is None:
        observable = ops.spin_ops(n)["SX"]

    scale = spectral_norm_estimate(lv)
    if scale == 0.0:
        raise DegenerateSteadyStateError("zero generator: every state is stationary")
    weight = float(np.mean(np.abs(lv.diagonal()))) or scale

    rho = None
    try:
        x = _bordered_solve(lv, _least_dominant_row(lv), weight)
        rho = _finalize(x)
        residual = float(np.linalg.norm(lv @ ops.vec(rho)))
    except (RuntimeError, ValueError):
        residual = np.inf

    # cheap always-on degeneracy screen for small systems; for large ones the
    # probe only runs when the direct solve failed to converge
    if d2 <= 256 or residual > RESIDUAL_RTOL * scale:
        lam1, lam2, v1 = _smallest_eigenpairs(lv, scale)
        if abs(lam2) < DEGENERACY_RTOL * scale:
            raise DegenerateSteadyStateError(
                f"second generator eigenvalue {abs(lam2):.3e} below "
                f"{DEGENERACY_RTOL:g} of the spectral scale {scale:.3e}"
            )
        if residual > RESIDUAL_RTOL * scale:
            rho = _finalize(v1)
            residual = float(np.linalg.norm(lv @ ops.vec(rho)))

    if rho is None or residual > RESIDUAL_RTOL * scale:
        raise SteadyStateConvergenceError(
            f"steady-state residual {residual:.3e} above {RESIDUAL_RTOL:g} * {scale:.3e}"
        )

    from .liouvillian import expectation

    sx = expectation(rho, observable)
    return SteadyStateResult(rho=rho, sx=sx, residual=residual, solver_tier=TIER_EXACT)


def independent_sx(n: int, omega0: float, delta: float, gamma0: float, gamma_c: float) -> float:
    """Stationary x polarization of n driven emitters with no couplings.

    Transverse decay runs at (gamma0 + 2*gamma_c)/2.
    """
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    gperp = gamma0 + 2.0 * gamma_c
    num = n * 4.0 * delta * omega0 * gamma0
    den = gamma0 * (4.0 * delta**2 + gperp**2) + 2.0 * omega0**2 * gperp
    return num / den


def independent_sx_bound(n: int, omega0: float, gamma0: float, gamma_c: float) -> float:
    """Upper bound of |independent_sx| over the detuning."""
    gperp = gamma0 + 2.0 * gamma_c
    return n * abs(omega0) * gamma0 / np.sqrt(gamma0 * gperp * (gamma0 * gperp + 2.0 * omega0**2))


def optimal_detuning(omega0: float, gamma0: float, gamma_c: float) -> float:
    """Detuning that maximizes |independent_sx| (negative branch)."""
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    gperp = gamma0 + 2.0 * gamma_c
    return -np.sqrt(gperp * (gamma0 * gperp + 2.0 * omega0**2) / (4.0 * gamma0))


def eta(sx_collective: float, n: int, omega0: float, gamma0: float, gamma_c: float) -> float:
    """Cooperative enhancement: collective over independent polarization,
    both taken at the optimal detuning."""
    delta0 = optimal_detuning(omega0, gamma0, gamma_c)
    baseline = independent_sx(n, omega0, delta0, gamma0, gamma_c)
    if abs(baseline) < 1e-300:
        raise ZeroDivisionError("independent-emitter baseline vanishes")
    return sx_collective / baseline


def dipole_force(grad_omega, sx: float) -> np.ndarray:
    """Dipole force on the host matrix: -(1/2) * grad(Omega) * <Sx> (hbar = 1)."""
    grad = np.asarray(grad_omega, dtype=float)
    return -0.5 * grad * sx
