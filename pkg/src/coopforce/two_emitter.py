"""Exact two-emitter steady state from coupled operator averages.

For two emitters the master equation closes on 15 real operator averages
(three single-emitter components per emitter plus nine two-emitter
correlators).  Permutation symmetry splits them into 9 symmetric
averages X (driven inhomogeneously) and 6 antisymmetric averages Y
(homogeneous, strictly decaying), so the stationary state follows from a
9x9 linear solve.  The equations of motion are generated numerically from
the adjoint master equation over the Pauli product basis rather than
transcribed by hand.

This route never touches the vectorized-superoperator machinery, which
makes it an independent cross-check for every numeric solver tier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS

#: relative distance of gamma12 from gamma0/2 below which the symmetric
#: system is singular and the collective limiting branch is used instead
COLLECTIVE_RTOL = 1e-9


class SingularSystemError(RuntimeError):
    """Symmetric-average system is singular away from the collective point."""


@dataclass(frozen=True)
class TwoEmitterParams:
    omega0: float
    delta: float
    gamma0: float
    gamma_c: float
    g12: float
    gamma12: float

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.gamma_c < 0:
            raise ValueError("gamma_c must be nonnegative")


@dataclass(frozen=True)
class TwoEmitterSystem:
    """Equation-of-motion matrices for the symmetric (X) and antisymmetric
    (Y) average vectors: dX/dt = mx @ X + x0, dY/dt = my @ Y."""

    mx: np.ndarray
    x0: np.ndarray
    my: np.ndarray
    params: TwoEmitterParams


def _kron2(a, b):
    return np.kron(a, b)


_I2 = np.eye(2, dtype=complex)


def _observable_sets():
    """Symmetric and antisymmetric Hermitian observables, plus the identity."""
    s1 = {k: _kron2(p, _I2) for k, p in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z))}
    s2 = {k: _kron2(_I2, p) for k, p in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z))}
    sym = [
        s1["x"] + s2["x"],
        s1["y"] + s2["y"],
        s1["z"] + s2["z"],
        s1["x"] @ s2["x"],
        s1["y"] @ s2["y"],
        s1["z"] @ s2["z"],
        s1["x"] @ s2["y"] + s1["y"] @ s2["x"],
        s1["x"] @ s2["z"] + s1["z"] @ s2["x"],
        s1["y"] @ s2["z"] + s1["z"] @ s2["y"],
    ]
    anti = [
        s1["x"] - s2["x"],
        s1["y"] - s2["y"],
        s1["z"] - s2["z"],
        s1["x"] @ s2["y"] - s1["y"] @ s2["x"],
        s1["x"] @ s2["z"] - s1["z"] @ s2["x"],
        s1["y"] @ s2["z"] - s1["z"] @ s2["y"],
    ]
    return sym, anti


def _adjoint_generator(params: TwoEmitterParams):
    """Heisenberg-picture generator O -> L+(O) as a function on 4x4 arrays."""
    sp1 = _kron2(SIGMA_PLUS, _I2)
    sp2 = _kron2(_I2, SIGMA_PLUS)
    sm1 = _kron2(SIGMA_MINUS, _I2)
    sm2 = _kron2(_I2, SIGMA_MINUS)
    sx = _kron2(SIGMA_X, _I2) + _kron2(_I2, SIGMA_X)
    sz = _kron2(SIGMA_Z, _I2) + _kron2(_I2, SIGMA_Z)
    h = (
        0.5 * params.omega0 * sx
        - 0.5 * params.delta * sz
        + params.g12 * (sp1 @ sm2 + sp2 @ sm1)
    )
    half = 0.5 * params.gamma0
    gmat = np.array([[half, params.gamma12], [params.gamma12, half]])
    sp_ = [sp1, sp2]
    sm_ = [sm1, sm2]

    def gen(o):
        out = 1.0j * (h @ o - o @ h)
        for m in range(2):
            for k in range(2):
                pmk = sp_[m] @ sm_[k]
                out = out + gmat[m, k] * (
                    2.0 * sp_[k] @ o @ sm_[m] - pmk @ o - o @ pmk
                )
        if params.gamma_c != 0.0:
            szo = sz @ o
            out = out - 0.25 * params.gamma_c * (
                sz @ szo - 2.0 * szo @ sz + (o @ sz) @ sz
            )
        return out

    return gen


def assemble_two_emitter_system(params: TwoEmitterParams) -> TwoEmitterSystem:
    """Build the average-evolution matrices from the adjoint master equation.

    The generator output of each basis observable is decomposed over the
    16-element operator basis; the symmetric and antisymmetric blocks must
    decouple exactly, which is asserted rather than assumed.
    """
    sym, anti = _observable_sets()
    basis = [np.eye(4, dtype=complex)] + sym + anti
    bmat = np.column_stack([b.flatten() for b in basis])
    gen = _adjoint_generator(params)

    def rows(obs_list):
        coeffs = []
        for o in obs_list:
            c = np.linalg.solve(bmat, gen(o).flatten())
            coeffs.append(c)
        return np.array(coeffs)

    cx = rows(sym)
    cy = rows(anti)
    scale = max(
        1.0,
        abs(params.omega0),
        abs(params.delta),
        params.gamma0,
        params.gamma_c,
        abs(params.g12),
        abs(params.gamma12),
    )
    if np.abs(cx.imag).max() > 1e-12 * scale or np.abs(cy.imag).max() > 1e-12 * scale:
        raise AssertionError("average equations of motion came out complex")
    cx = cx.real
    cy = cy.real
    cross_x = np.abs(cx[:, 10:]).max()
    cross_y = np.abs(np.concatenate([cy[:, 0:1], cy[:, 1:10]], axis=1)).max()
    if max(cross_x, cross_y) > 1e-12 * scale:
        raise AssertionError("symmetric/antisymmetric blocks failed to decouple")
    mx = cx[:, 1:10]
    x0 = cx[:, 0]
    my = cy[:, 10:]
    return TwoEmitterSystem(mx=mx, x0=x0, my=my, params=params)


def _collective_limit_solution(params: TwoEmitterParams) -> np.ndarray:
    """Stationary symmetric averages in the fully collective case, defined
    as the limit of the unique solution as gamma12 -> gamma0/2.

    First-order perturbation theory in (gamma0/2 - gamma12) fixes the
    otherwise free component along the null direction of the singular
    system matrix.
    """
    g0 = params.gamma0
    sys0 = assemble_two_emitter_system(
        TwoEmitterParams(
            params.omega0, params.delta, g0, params.gamma_c, params.g12, 0.5 * g0
        )
    )
    # the matrices are affine in gamma12, so one finite difference is exact
    eps = 0.125 * g0
    sys1 = assemble_two_emitter_system(
        TwoEmitterParams(
            params.omega0, params.delta, g0, params.gamma_c, params.g12, 0.5 * g0 - eps
        )
    )
    dmx = (sys0.mx - sys1.mx) / eps  # d(mx)/d(eps) with eps = gamma0/2 - gamma12
    dx0 = (sys0.x0 - sys1.x0) / eps

    u, s, vt = np.linalg.svd(sys0.mx)
    if s[-2] < 1e-9 * max(s[0], 1.0):
        raise SingularSystemError("collective system is more than rank-1 deficient")
    left_null = u[:, -1]
    right_null = vt[-1, :]
    # minimum-norm particular solution of mx @ x = -x0
    s_inv = np.where(s > 1e-12 * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    x_part = -(vt.T @ (s_inv * (u.T @ sys0.x0)))
    # solvability of the first-order correction fixes the null coefficient
    denom = left_null @ (dmx @ right_null)
    if abs(denom) < 1e-14:
        raise SingularSystemError("collective limit is indeterminate")
    coef = -(left_null @ dx0 + left_null @ (dmx @ x_part)) / denom
    return x_part + coef * right_null


def steady_state_n2(params: TwoEmitterParams):
    """Stationary collective x polarization and the full 15-average vector.

    Returns ``(sx, averages)`` where ``averages`` stacks the 9 symmetric
    and 6 antisymmetric stationary values (the latter are identically
    zero whenever the antisymmetric block is damped).
    """
    system = assemble_two_emitter_system(params)
    collective = abs(0.5 * params.gamma0 - params.gamma12) < COLLECTIVE_RTOL * params.gamma0
    if collective:
        x = _collective_limit_solution(params)
    else:
        try:
            x = np.linalg.solve(system.mx, -system.x0)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "symmetric system singular away from the collective point"
            ) from exc
        resid = np.linalg.norm(system.mx @ x + system.x0)
        scale = np.linalg.norm(system.mx) * max(1.0, np.linalg.norm(x))
        if not np.isfinite(resid) or resid > 1e-8 * scale:
            raise SingularSystemError(
                f"ill-conditioned symmetric system: residual {resid:.3e}"
            )
    averages = np.concatenate([x, np.zeros(6)])
    return float(x[0]), averages


def steady_sx_n2(
    omega0: float,
    delta: float,
    gamma0: float,
    gamma_c: float,
    g12: float,
    gamma12: float,
) -> float:
    """Convenience wrapper returning only the stationary x polarization."""
    sx, _ = steady_state_n2(
        TwoEmitterParams(omega0, delta, gamma0, gamma_c, g12, gamma12)
    )
    return sx


def eta_limit_large_dephasing(
    chi: float, omega0: float, gamma0: float, gamma_c: float, collective: bool = False
) -> float:
    """Leading enhancement excess (eta - 1) for dephasing much faster than
    emission.  Positive only above a drive threshold."""
    w2 = (omega0 / gamma0) ** 2
    if collective:
        return (gamma0 / (4.0 * gamma_c)) * (w2 - 2.0)
    return (gamma0 / gamma_c) * chi / (2.0 * (1.0 + chi)) * (w2 - 1.0 - chi)


def eta_limit_no_dephasing(
    chi: float, g_bar: float, omega0: float, gamma0: float, collective: bool = False
) -> float:
    """Strong-drive enhancement excess (eta - 1) without collective dephasing.

    Strictly negative for any partially collective pair; the fully
    collective variant saturates at +1/15.
    """
    if collective:
        return 1.0 / 15.0 - 112.0 * (16.0 * g_bar**2 + 15.0 * gamma0**2) / (
            3315.0 * omega0**2
        )
    return -(gamma0**2 / (8.0 * omega0**2)) * (
        chi**2 + 2.0 * chi + 4.0 * g_bar**2 / gamma0**2
    )
