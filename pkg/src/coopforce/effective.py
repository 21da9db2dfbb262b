"""Effective dynamics after eliminating fast collective dephasing.

When the dephasing rate and the optimal detuning dwarf the drive, the
dipole couplings, and the emission rates, the fast part of the generator
(dephasing plus detuning) relaxes any state onto its block-diagonal
projection over total-inversion sectors.  Second-order elimination of the
drive then leaves a generator on those block-diagonal states:

    d mu/dt = -i [H_dd, mu] + (emission dissipators)
              - (kappa / 4) ([S-, [S+, mu]] + [S+, [S-, mu]])

with the incoherent drive rate kappa = omega0^2 gamma_c / (gamma_c^2 +
delta0^2).  The double-commutator term is identical to a pair of Lindblad
channels sqrt(kappa/2) S+ and sqrt(kappa/2) S-.

The physical x polarization lives outside the block-diagonal subspace; it
is reconstructed to first order in the eliminated coupling, which gives
<Sx> = -omega0 * delta0 / (gamma_c^2 + delta0^2) * <Sz>_mu.  The factor is
validated against the exact solver in the tests rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .geometry import PairCoefficients

#: generator assembly above this register size is refused (use trajectories)
DEFAULT_GENERATOR_LIMIT = 8

#: slow scales must stay below this fraction of the fast scales
VALIDITY_RATIO = 0.1


class AdiabaticValidityError(RuntimeError):
    """Requested parameters violate the time-scale hierarchy the
    elimination relies on."""


def kappa(omega0: float, gamma_c: float, delta0: float) -> float:
    """Incoherent drive rate left behind by the eliminated coherent drive."""
    if gamma_c <= 0:
        raise ValueError("gamma_c must be positive")
    return omega0**2 * gamma_c / (gamma_c**2 + delta0**2)


def sx_reconstruction_factor(omega0: float, gamma_c: float, delta0: float) -> float:
    """First-order map from the block-diagonal <Sz> to the physical <Sx>."""
    return -omega0 * delta0 / (gamma_c**2 + delta0**2)


def check_validity(
    g_bar: float,
    omega0: float,
    gamma_c: float,
    delta0: float,
    override: bool = False,
) -> None:
    """Enforce the time-scale hierarchy (dipole shifts and drive slow
    compared with dephasing and detuning) unless explicitly overridden."""
    if override:
        return
    fast = min(gamma_c, abs(delta0))
    if max(abs(g_bar), abs(omega0)) > VALIDITY_RATIO * fast:
        raise AdiabaticValidityError(
            f"g_bar={g_bar:.3g} or omega0={omega0:.3g} exceeds "
            f"{VALIDITY_RATIO:g} * min(gamma_c, |delta0|) = {VALIDITY_RATIO * fast:.3g}"
        )


@dataclass(frozen=True)
class EffectiveMESpec:
    """Parameters of the block-diagonal effective master equation."""

    kappa: float
    coeffs: PairCoefficients
    omega0: float = 0.0
    gamma_c: float = 0.0
    delta0: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    @property
    def n(self) -> int:
        return self.coeffs.n

    @classmethod
    def from_drive(
        cls, omega0: float, gamma_c: float, delta0: float, coeffs: PairCoefficients
    ) -> "EffectiveMESpec":
        return cls(
            kappa=kappa(omega0, gamma_c, delta0),
            coeffs=coeffs,
            omega0=omega0,
            gamma_c=gamma_c,
            delta0=delta0,
        )

    @property
    def sx_factor(self) -> float:
        return sx_reconstruction_factor(self.omega0, self.gamma_c, self.delta0)


def dark_subspace_indices(n: int) -> np.ndarray:
    """Vectorized-state indices of the block-diagonal (equal total
    inversion) matrix elements, in column-major vec ordering."""
    d = 2**n
    sectors = ops.excitation_sectors(n)
    idx = []
    for states in sectors:
        cols, rows = np.meshgrid(states, states, indexing="ij")
        idx.append((cols * d + rows).ravel())
    return np.sort(np.concatenate(idx))


def exchange_hamiltonian(coeffs: PairCoefficients) -> sp.csr_matrix:
    """Dipole-exchange Hamiltonian (no drive, no detuning)."""
    n = coeffs.n
    prods = ops.pair_products(n)
    h = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for m in range(n):
        for k in range(n):
            if m != k and coeffs.g[m, k] != 0.0:
                h = h + coeffs.g[m, k] * prods[(m, k)]
    return h.tocsr()


def build_effective_generator(
    spec: EffectiveMESpec, max_n: int = DEFAULT_GENERATOR_LIMIT
):
    """Assemble the effective generator restricted to block-diagonal states.

    Returns ``(gen, indices)`` where ``gen`` is sparse on the restricted
    space and ``indices`` maps its coordinates back into the full
    vectorized space.  All terms preserve block-diagonality, so the
    restriction loses nothing.
    """
    n = spec.n
    if n > max_n:
        raise ValueError(
            f"n={n} exceeds the effective-generator assembly limit {max_n}; "
            "use the trajectory solver"
        )
    so = ops.spin_ops(n)
    lv = ops.commutator_super(exchange_hamiltonian(spec.coeffs))
    pieces = ops.emission_superop_pieces(n)
    gamma = spec.coeffs.gamma
    for m in range(n):
        for k in range(n):
            if gamma[m, k] != 0.0:
                lv = lv + gamma[m, k] * pieces[(m, k)]
    if spec.kappa != 0.0:
        lv = lv + 0.5 * spec.kappa * (
            ops.dissipator_super(so["Splus"]) + ops.dissipator_super(so["Sminus"])
        )
    lv = lv.tocsr()
    idx = dark_subspace_indices(n)
    gen = lv[idx][:, idx].tocsr()
    return gen, idx


def effective_steady_state(spec: EffectiveMESpec):
    """Directly solve the restricted generator for its stationary state.

    Returns ``(mu, sz, residual)`` with ``mu`` the block-diagonal density
    matrix in the full basis.  Intended for modest sizes and as the
    reference the trajectory sampler is checked against.
    """
    n = spec.n
    d = 2**n
    gen, idx = build_effective_generator(spec)
    nv = gen.shape[0]
    a = abs(gen)
    dom = 2.0 * np.abs(gen.diagonal()) - np.asarray(a.sum(axis=1)).ravel()
    row = int(np.argmin(dom))
    diag_full = idx % d == idx // d
    weight = max(float(np.mean(np.abs(gen.diagonal()))), 1e-300)
    mask = np.ones(nv)
    mask[row] = 0.0
    amat = sp.diags(mask) @ gen
    cols = np.where(diag_full)[0]
    border = sp.csr_matrix(
        (np.full(cols.size, weight, dtype=complex), (np.full(cols.size, row), cols)),
        shape=(nv, nv),
    )
    amat = (amat + border).tocsc()
    rhs = np.zeros(nv, dtype=complex)
    rhs[row] = weight
    x = sp.linalg.splu(amat).solve(rhs)
    residual = float(np.linalg.norm(gen @ x))

    full = np.zeros(d * d, dtype=complex)
    full[idx] = x
    mu = ops.unvec(full)
    mu = 0.5 * (mu + mu.conj().T)
    mu /= np.trace(mu).real
    sz = float(np.real(np.trace(ops.spin_ops(n)["SZ"].toarray() @ mu)))
    return mu, sz, residual


def effective_steady_sx(spec: EffectiveMESpec):
    """Reconstructed stationary x polarization from the direct solve."""
    _, sz, residual = effective_steady_state(spec)
    return spec.sx_factor * sz, residual
