"""Hamiltonian and full master-equation generator of the driven ensemble.

The generator combines the coherent part (drive, detuning, dipole-dipole
exchange), correlated spontaneous emission with the pairwise rate matrix,
and collective dephasing of the total inversion:

    d rho/dt = -i [H, rho]
               + sum_mn gamma_mn (2 s_m^- rho s_n^+ - s_m^+ s_n^- rho
                                  - rho s_m^+ s_n^-)
               - (gamma_c / 4) [Sz, [Sz, rho]]

Everything is expressed in rotating-frame units with hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .geometry import PairCoefficients
from . import operators as ops

#: largest emitter count for which the 4**n generator is assembled by default
DEFAULT_EXACT_LIMIT = 6


class ExactSizeError(ValueError):
    """Requested generator above the configured exact-diagonalization size."""


@dataclass(frozen=True)
class DriveParams:
    """Classical drive seen by the ensemble: Rabi frequency at the trap
    center, detuning from the bare transition, and (optionally) the Rabi
    gradient used for force evaluation."""

    omega0: float
    delta: float
    grad_omega: Optional[np.ndarray] = None

    def __post_init__(self):
        if not np.isfinite(self.omega0) or np.iscomplexobj(self.omega0):
            raise ValueError("omega0 must be a finite real number")
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")
        if self.grad_omega is not None:
            grad = np.asarray(self.grad_omega, dtype=float)
            if grad.shape != (3,):
                raise ValueError("grad_omega must be a 3-vector")
            object.__setattr__(self, "grad_omega", grad)


@dataclass(frozen=True)
class MasterEquationSpec:
    """Full parameter set of the master equation."""

    drive: DriveParams
    gamma_c: float
    coeffs: PairCoefficients

    def __post_init__(self):
        if self.gamma_c < 0:
            raise ValueError("gamma_c must be nonnegative")

    @property
    def n(self) -> int:
        return self.coeffs.n


def build_hamiltonian(spec: MasterEquationSpec) -> np.ndarray:
    """Dense rotating-frame Hamiltonian: drive + detuning + dipole exchange."""
    n = spec.n
    so = ops.spin_ops(n)
    h = 0.5 * spec.drive.omega0 * so["SX"] - 0.5 * spec.drive.delta * so["SZ"]
    prods = ops.pair_products(n)
    g = spec.coeffs.g
    for m in range(n):
        for k in range(n):
            if m != k and g[m, k] != 0.0:
                h = h + g[m, k] * prods[(m, k)]
    return np.asarray(h.todense())


def build_liouvillian(spec: MasterEquationSpec, max_exact_n: int = DEFAULT_EXACT_LIMIT) -> sp.csr_matrix:
    """Assemble the sparse 4**n generator acting on vectorized states."""
    n = spec.n
    if n > max_exact_n:
        raise ExactSizeError(
            f"n={n} exceeds the exact-generator limit {max_exact_n}; "
            "use the rate-equation or trajectory tiers"
        )
    h = sp.csr_matrix(build_hamiltonian(spec))
    lv = ops.commutator_super(h)
    pieces = ops.emission_superop_pieces(n)
    gamma = spec.coeffs.gamma
    for m in range(n):
        for k in range(n):
            if gamma[m, k] != 0.0:
                lv = lv + gamma[m, k] * pieces[(m, k)]
    if spec.gamma_c != 0.0:
        lv = lv + spec.gamma_c * ops.dephasing_superop(n)
    return lv.tocsr()


def apply_liouvillian(spec: MasterEquationSpec, rho: np.ndarray) -> np.ndarray:
    """Matrix-free action of the generator on a density matrix."""
    n = spec.n
    d = 2**n
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d, d):
        raise ValueError(f"rho must be {d}x{d} for n={n}")
    h = build_hamiltonian(spec)
    out = -1.0j * (h @ rho - rho @ h)
    so = ops.spin_ops(n)
    sm, sp_ = so["sm"], so["sp"]
    prods = ops.pair_products(n)
    gamma = spec.coeffs.gamma
    for m in range(n):
        for k in range(n):
            gmk = gamma[m, k]
            if gmk == 0.0:
                continue
            smr = sm[m] @ rho
            out += gmk * (
                2.0 * (smr @ sp_[k].toarray())
                - prods[(m, k)] @ rho
                - rho @ prods[(m, k)].toarray()
            )
    if spec.gamma_c != 0.0:
        SZ = so["SZ"].toarray()
        szr = SZ @ rho
        out += -0.25 * spec.gamma_c * (SZ @ szr - 2.0 * (szr @ SZ) + (rho @ SZ) @ SZ)
    return out


def expectation(rho: np.ndarray, observable, imag_tol: float = 1e-8) -> float:
    """Real expectation value Tr(O rho); complains about non-Hermitian input."""
    if sp.issparse(observable):
        val = complex((observable.multiply(np.asarray(rho).T)).sum())
    else:
        val = complex(np.trace(np.asarray(observable) @ np.asarray(rho)))
    scale = max(1.0, abs(val))
    if abs(val.imag) > imag_tol * scale:
        raise ValueError(
            f"expectation has imaginary part {val.imag:.3e}; inputs not Hermitian?"
        )
    return float(val.real)


def validate_density_matrix(
    rho: np.ndarray,
    herm_tol: float = 1e-10,
    trace_tol: float = 1e-10,
    eig_floor: float = -1e-8,
) -> None:
    """Raise if rho is not Hermitian, unit-trace and (nearly) positive."""
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"state not Hermitian: max |rho - rho+| = {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"state trace {tr!r} differs from 1")
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if evals.min() < eig_floor:
        raise ValueError(f"state has negative eigenvalue {evals.min():.3e}")
