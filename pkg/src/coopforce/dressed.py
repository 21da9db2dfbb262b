"""Secular rate equations in the eigenbasis of the driven Hamiltonian.

Valid at small separations, where dipole shifts split the spectrum by much
more than the dissipative rates.  The Hamiltonian (drive + detuning +
dipole exchange) is diagonalized, every Lindblad channel is rotated into
that eigenbasis, and matrix elements connecting transitions whose Bohr
frequencies differ by more than a secular tolerance are dropped.  What
remains is a classical master equation for the dressed populations plus a
small block of retained near-degenerate coherences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .effective import kappa as kappa_rate
from .liouvillian import MasterEquationSpec, build_hamiltonian
from .steady import TIER_RATE, SteadyStateResult


class RateEquationDegeneracyError(RuntimeError):
    """The secular generator has a multidimensional null space."""


class NearDegenerateSpectrumWarning(UserWarning):
    """Dressed transitions closer than the secular tolerance; coherences
    between them were retained."""


@dataclass(frozen=True)
class RateEquationModel:
    """Dressed-basis reduction: energies, stationary populations, and the
    population-transfer rate matrix (columns conserve probability)."""

    dressed_energies: np.ndarray
    populations: np.ndarray
    rate_matrix: np.ndarray
    secular_tol: float


def default_secular_tol(spec: MasterEquationSpec) -> float:
    """Coherences are kept below ten times the fastest dissipative rate."""
    g0 = spec.coeffs.gamma0
    kap = 0.0
    if spec.gamma_c > 0.0:
        kap = kappa_rate(spec.drive.omega0, spec.gamma_c, spec.drive.delta)
    return 10.0 * max(g0, kap)


def lindblad_channels(spec: MasterEquationSpec):
    """Jump operators whose dissipators reproduce the full master equation.

    The pairwise emission matrix is diagonalized into collective decay
    modes sqrt(2 lam_c) sum_m v_mc sigma_m^-; collective dephasing adds
    sqrt(gamma_c/2) Sz.
    """
    n = spec.n
    so = ops.spin_ops(n)
    lam, v = np.linalg.eigh(spec.coeffs.gamma)
    chans = []
    for c in range(n):
        rate = 2.0 * lam[c]
        if rate <= 0.0:
            # eigh roundoff can leave tiny negative weight on a dark mode
            continue
        op = sum(v[m, c] * so["sm"][m] for m in range(n) if v[m, c] != 0.0)
        chans.append(np.sqrt(rate) * op.tocsr())
    if spec.gamma_c > 0.0:
        chans.append(np.sqrt(0.5 * spec.gamma_c) * so["SZ"])
    return chans


def dressed_rate_steady_state(spec: MasterEquationSpec, secular_tol: float | None = None):
    """Stationary state of the secular master equation in the dressed basis.

    Returns ``(SteadyStateResult, RateEquationModel)``.  The result's state
    is reconstructed in the bare basis from the retained elements.
    """
    if secular_tol is None:
        secular_tol = default_secular_tol(spec)
    n = spec.n
    d = 2**n
    h = build_hamiltonian(spec)
    energies, vecs = np.linalg.eigh(h)

    channels = [vecs.conj().T @ (c @ vecs) for c in lindblad_channels(spec)]

    # retained elements: populations plus coherences between quasi-degenerate
    # dressed levels
    pairs = [(k, k) for k in range(d)]
    gap = np.abs(energies[:, None] - energies[None, :])
    ks, ls = np.where((gap <= secular_tol) & ~np.eye(d, dtype=bool))
    pairs += list(zip(ks.tolist(), ls.tolist()))
    if len(pairs) > d:
        warnings.warn(
            f"{len(pairs) - d} near-degenerate coherences retained",
            NearDegenerateSpectrumWarning,
            stacklevel=2,
        )
    nv = len(pairs)
    k_arr = np.array([p[0] for p in pairs])
    l_arr = np.array([p[1] for p in pairs])

    gen = np.diag(-1.0j * (energies[k_arr] - energies[l_arr])).astype(complex)
    same_l = l_arr[:, None] == l_arr[None, :]
    same_k = k_arr[:, None] == k_arr[None, :]
    for ch in channels:
        chd = ch.conj().T @ ch
        gen += ch[k_arr[:, None], k_arr[None, :]] * np.conj(
            ch[l_arr[:, None], l_arr[None, :]]
        )
        gen -= 0.5 * chd[k_arr[:, None], k_arr[None, :]] * same_l
        gen -= 0.5 * chd[l_arr[None, :], l_arr[:, None]] * same_k

    # population-transfer matrix for diagnostics and invariants
    wmat = np.zeros((d, d))
    for ch in channels:
        wmat += np.abs(ch) ** 2
    rate_matrix = wmat - np.diag(np.sum(wmat, axis=0))

    # bordered solve: replace the least diagonally dominant row by the trace
    diag_dom = 2.0 * np.abs(np.diag(gen)) - np.sum(np.abs(gen), axis=1)
    row = int(np.argmin(diag_dom))
    weight = max(float(np.mean(np.abs(np.diag(gen)))), 1e-300)
    amat = gen.copy()
    amat[row, :] = 0.0
    for i, (k, l) in enumerate(pairs):
        if k == l:
            amat[row, i] = weight
    rhs = np.zeros(nv, dtype=complex)
    rhs[row] = weight
    try:
        x = np.linalg.solve(amat, rhs)
    except np.linalg.LinAlgError as exc:
        raise RateEquationDegeneracyError("secular generator is singular") from exc
    resid = float(np.linalg.norm(gen @ x))
    scale = float(np.linalg.norm(gen)) or 1.0
    if not np.isfinite(resid) or resid > 1e-8 * scale:
        raise RateEquationDegeneracyError(
            f"secular steady state did not converge: residual {resid:.3e}"
        )

    rho_dressed = np.zeros((d, d), dtype=complex)
    for i, (k, l) in enumerate(pairs):
        rho_dressed[k, l] = x[i]
    rho_dressed = 0.5 * (rho_dressed + rho_dressed.conj().T)
    populations = np.real(np.diag(rho_dressed)).copy()
    if populations.min() < -1e-8 or abs(populations.sum() - 1.0) > 1e-8:
        raise RateEquationDegeneracyError(
            f"unphysical dressed populations (min {populations.min():.3e})"
        )
    np.clip(populations, 0.0, None, out=populations)

    rho = vecs @ rho_dressed @ vecs.conj().T
    sx_dressed = vecs.conj().T @ (ops.spin_ops(n)["SX"] @ vecs)
    sx = float(np.real(np.sum(sx_dressed.T * rho_dressed)))

    result = SteadyStateResult(rho=rho, sx=sx, residual=resid, solver_tier=TIER_RATE)
    model = RateEquationModel(
        dressed_energies=energies,
        populations=populations,
        rate_matrix=rate_matrix,
        secular_tol=float(secular_tol),
    )
    return result, model
