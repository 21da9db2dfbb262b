"""Monte-Carlo wave-function sampling of the effective master equation.

Every term of the effective generator either preserves or shifts the total
excitation number, so a pure-state trajectory always lives inside a single
excitation sector.  Within a sector the non-Hermitian drift Hamiltonian is
time independent and is propagated exactly through its eigendecomposition;
jump times are found by root-solving the monotone squared-norm decay down
to the drawn threshold, rather than by fixed stepping.  The estimated
observable, the block-diagonal total inversion, is constant between jumps,
which makes the time average an exact dwell-time sum.

Randomness comes from one splitmix64 stream per trajectory, derived
statelessly from (seed, trajectory index); results are reproducible for a
fixed seed under any threading or process layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .effective import EffectiveMESpec

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

#: eigendecomposition reconstruction error (relative) beyond which the
#: sector propagator is considered unreliable
EIG_RESIDUAL_RTOL = 1e-8

MAX_SEGMENTS = 10_000_000


class TrajectoryConditioningError(RuntimeError):
    """A sector drift matrix was too close to defective to diagonalize."""


class TrajectoryRuntimeError(RuntimeError):
    """The sampler hit an internal inconsistency (norm or segment budget)."""


@dataclass(frozen=True)
class TrajectoryEstimate:
    """Trajectory-averaged stationary polarization with its standard error."""

    mean_sx: float
    stderr: float
    n_traj: int
    horizon: float
    seed: int
    jumps: int = 0


@njit(cache=True)
def _sm64_next(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _sm64_double(state):
    state, z = _sm64_next(state)
    return state, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _matvec(a, x, out):
    # hand-rolled for small blocks where BLAS dispatch overhead dominates
    rows, cols = a.shape
    if rows >= 48:
        out[:rows] = np.dot(a, x[:cols])
        return
    for i in range(rows):
        acc = 0.0 + 0.0j
        for j in range(cols):
            acc += a[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _norm2_at(r_mat, z_vec, coef, tau, y):
    d = z_vec.shape[0]
    w = np.empty(d, dtype=np.complex128)
    for i in range(d):
        w[i] = coef[i] * np.exp(-1j * z_vec[i] * tau)
    _matvec(r_mat, w, y)
    acc = 0.0
    for i in range(d):
        acc += y[i].real ** 2 + y[i].imag ** 2
    return acc


@njit(cache=True)
def _solve_crossing(r_mat, z_vec, coef, target, t_hi, f_hi, scratch):
    """Root of ||psi(tau)||^2 = target on (0, t_hi] by Illinois iteration
    on the log-norm; the norm is monotone non-increasing."""
    lo = 0.0
    f_lo = -np.log(target)  # log(norm2(0)) - log(target), norm2(0) = 1
    hi = t_hi
    tol = 1e-12 * t_hi + 1e-300
    tau = 0.5 * t_hi
    for _ in range(300):
        if f_lo - f_hi > 1e-300:
            tau = lo + (hi - lo) * f_lo / (f_lo - f_hi)
        else:
            tau = 0.5 * (lo + hi)
        if tau <= lo or tau >= hi:
            tau = 0.5 * (lo + hi)
        n2 = _norm2_at(r_mat, z_vec, coef, tau, scratch)
        f = np.log(n2 / target) if n2 > 0.0 else -745.0
        if f > 0.0:
            lo = tau
            f_lo = f
        else:
            hi = tau
            f_hi = f
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def _run_trajectory(
    n,
    dims,
    off_r,
    buf_r,
    buf_ri,
    off_z,
    buf_z,
    n_ch,
    ch_delta,
    off_b,
    buf_b,
    horizon,
    burn_in,
    rng_state,
):
    """One trajectory from the fully inverted-free (all ground) state.

    Returns (time-averaged Sz over [burn_in, horizon], jump count,
    error code).  Error codes: 0 ok, 1 segment budget exceeded, 2 jump
    predicted but no channel has weight.
    """
    k = 0
    dmax = 0
    for kk in range(n + 1):
        if dims[kk] > dmax:
            dmax = dims[kk]
    psi = np.zeros(dmax, dtype=np.complex128)
    psi[0] = 1.0
    coef = np.empty(dmax, dtype=np.complex128)
    y_tau = np.empty(dmax, dtype=np.complex128)
    v_out = np.empty(dmax, dtype=np.complex128)
    t = 0.0
    acc = 0.0
    jumps = 0
    window = horizon - burn_in
    for _seg in range(MAX_SEGMENTS):
        d = dims[k]
        r_mat = buf_r[off_r[k] : off_r[k] + d * d].reshape(d, d)
        ri_mat = buf_ri[off_r[k] : off_r[k] + d * d].reshape(d, d)
        z_vec = buf_z[off_z[k] : off_z[k] + d]
        _matvec(ri_mat, psi, coef)

        rng_state, u = _sm64_double(rng_state)
        target = u
        if target < 1e-300:
            target = 1e-300

        t_rem = horizon - t
        n2_end = _norm2_at(r_mat, z_vec, coef, t_rem, y_tau)
        if n2_end > target:
            # no jump before the horizon
            lo = t if t > burn_in else burn_in
            if horizon > lo:
                acc += (2.0 * k - n) * (horizon - lo)
            return acc / window, jumps, 0

        f_hi = np.log(n2_end / target) if n2_end > 0.0 else -745.0
        tau = _solve_crossing(r_mat, z_vec, coef, target, t_rem, f_hi, y_tau)
        lo = t if t > burn_in else burn_in
        hi = t + tau if t + tau < horizon else horizon
        if hi > lo:
            acc += (2.0 * k - n) * (hi - lo)
        _norm2_at(r_mat, z_vec, coef, tau, y_tau)

        # channel weights ||B_c psi(tau)||^2
        weights = np.zeros(n_ch)
        total = 0.0
        for c in range(n_ch):
            kd = k + ch_delta[c]
            if kd < 0 or kd > n:
                continue
            d_out = dims[kd]
            blk = buf_b[off_b[c, k] : off_b[c, k] + d_out * d].reshape(d_out, d)
            _matvec(blk, y_tau, v_out)
            w = 0.0
            for i in range(d_out):
                w += v_out[i].real ** 2 + v_out[i].imag ** 2
            weights[c] = w
            total += w
        if total <= 0.0:
            return acc / window, jumps, 2
        rng_state, u2 = _sm64_double(rng_state)
        pick = u2 * total
        csum = 0.0
        chosen = n_ch - 1
        for c in range(n_ch):
            csum += weights[c]
            if pick < csum:
                chosen = c
                break
        kd = k + ch_delta[chosen]
        d_out = dims[kd]
        blk = buf_b[off_b[chosen, k] : off_b[chosen, k] + d_out * d].reshape(d_out, d)
        _matvec(blk, y_tau, v_out)
        nrm = np.sqrt(weights[chosen])
        for i in range(d_out):
            psi[i] = v_out[i] / nrm
        k = kd
        t = t + tau
        jumps += 1
        if t >= horizon:
            return acc / window, jumps, 0
    return acc / window, jumps, 1


class SectorPropagators:
    """Per-sector eigendecomposed drift and jump blocks, packed into flat
    buffers the compiled trajectory kernel can consume."""

    def __init__(self, spec: EffectiveMESpec):
        n = spec.n
        self.n = n
        sectors = ops.excitation_sectors(n)
        dims = np.array([len(s) for s in sectors], dtype=np.int64)
        so = ops.spin_ops(n)

        from .dressed import lindblad_channels  # circular-import safe at call time
        from .effective import exchange_hamiltonian
        from .liouvillian import DriveParams, MasterEquationSpec

        # collective decay modes of the emission matrix (no dephasing channel
        # here: dephasing has already been eliminated into kappa)
        decay_spec = MasterEquationSpec(
            DriveParams(0.0, 0.0), 0.0, spec.coeffs
        )
        channel_ops = lindblad_channels(decay_spec)
        deltas = [-1] * len(channel_ops)
        if spec.kappa > 0.0:
            root = np.sqrt(0.5 * spec.kappa)
            channel_ops.append(root * so["Splus"])
            deltas.append(+1)
            channel_ops.append(root * so["Sminus"])
            deltas.append(-1)
        self.ch_delta = np.array(deltas, dtype=np.int64)
        n_ch = len(channel_ops)

        h_full = exchange_hamiltonian(spec.coeffs).toarray()
        k_full = np.zeros_like(h_full)
        for op in channel_ops:
            dense = op.toarray()
            k_full += dense.conj().T @ dense

        # pack per-sector eigendecompositions
        off_r = np.zeros(n + 2, dtype=np.int64)
        off_z = np.zeros(n + 2, dtype=np.int64)
        for k in range(n + 1):
            off_r[k + 1] = off_r[k] + dims[k] ** 2
            off_z[k + 1] = off_z[k] + dims[k]
        buf_r = np.zeros(off_r[-1], dtype=np.complex128)
        buf_ri = np.zeros(off_r[-1], dtype=np.complex128)
        buf_z = np.zeros(off_z[-1], dtype=np.complex128)
        for k, states in enumerate(sectors):
            blk = np.ix_(states, states)
            heff = h_full[blk] - 0.5j * k_full[blk]
            z, r = np.linalg.eig(heff)
            ri = np.linalg.inv(r)
            resid = np.abs((r * z) @ ri - heff).max()
            scale = max(np.abs(heff).max(), 1.0)
            if resid > EIG_RESIDUAL_RTOL * scale:
                raise TrajectoryConditioningError(
                    f"sector {k} drift reconstruction error {resid:.3e} "
                    f"(scale {scale:.3e})"
                )
            d = dims[k]
            buf_r[off_r[k] : off_r[k] + d * d] = r.ravel()
            buf_ri[off_r[k] : off_r[k] + d * d] = ri.ravel()
            buf_z[off_z[k] : off_z[k] + d] = z

        # pack jump blocks per (channel, source sector)
        off_b = np.zeros((n_ch, n + 1), dtype=np.int64)
        pos = 0
        dense_channels = [op.toarray() for op in channel_ops]
        for c in range(n_ch):
            for k in range(n + 1):
                kd = k + int(self.ch_delta[c])
                off_b[c, k] = pos
                if 0 <= kd <= n:
                    pos += int(dims[kd] * dims[k])
        buf_b = np.zeros(pos, dtype=np.complex128)
        for c, dense in enumerate(dense_channels):
            for k, states in enumerate(sectors):
                kd = k + int(self.ch_delta[c])
                if not (0 <= kd <= n):
                    continue
                blk = dense[np.ix_(sectors[kd], states)]
                size = blk.size
                buf_b[off_b[c, k] : off_b[c, k] + size] = blk.ravel()

        self.dims = dims
        self.off_r = off_r[:-1]
        self.off_z = off_z[:-1]
        self.buf_r = buf_r
        self.buf_ri = buf_ri
        self.buf_z = buf_z
        self.n_ch = n_ch
        self.off_b = off_b
        self.buf_b = buf_b


def trajectory_steady_sx(
    spec: EffectiveMESpec,
    n_traj: int = 200,
    horizon: float | None = None,
    burn_in: float | None = None,
    seed: int = 0,
) -> TrajectoryEstimate:
    """Estimate the stationary x polarization by trajectory averaging.

    Each trajectory time-averages the total inversion over
    ``[burn_in, horizon]``; the polarization follows through the
    first-order reconstruction factor of the effective frame.
    """
    if n_traj < 2:
        raise ValueError("need at least two trajectories for a standard error")
    rate = spec.kappa if spec.kappa > 0.0 else spec.coeffs.gamma0
    if horizon is None:
        horizon = 100.0 / rate
    if burn_in is None:
        burn_in = 10.0 / rate
    if not horizon > burn_in:
        raise ValueError("horizon must exceed burn_in")

    props = SectorPropagators(spec)
    streams = np.random.SeedSequence([int(seed), 0x72616A]).generate_state(
        n_traj, dtype=np.uint64
    )
    means = np.empty(n_traj)
    total_jumps = 0
    for i in range(n_traj):
        mean_sz, jumps, code = _run_trajectory(
            props.n,
            props.dims,
            props.off_r,
            props.buf_r,
            props.buf_ri,
            props.off_z,
            props.buf_z,
            props.n_ch,
            props.ch_delta,
            props.off_b,
            props.buf_b,
            float(horizon),
            float(burn_in),
            np.uint64(streams[i]),
        )
        if code == 1:
            raise TrajectoryRuntimeError("trajectory exceeded the segment budget")
        if code == 2:
            raise TrajectoryRuntimeError(
                "norm crossed the jump threshold but no channel has weight"
            )
        means[i] = mean_sz
        total_jumps += jumps

    factor = spec.sx_factor
    mean_sx = factor * float(np.mean(means))
    stderr = abs(factor) * float(np.std(means, ddof=1) / np.sqrt(n_traj))
    return TrajectoryEstimate(
        mean_sx=mean_sx,
        stderr=stderr,
        n_traj=n_traj,
        horizon=float(horizon),
        seed=int(seed),
        jumps=total_jumps,
    )
