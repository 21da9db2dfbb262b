"""Emitter geometries and the pairwise coupling/emission coefficients.

All lengths are in units of the transition wavelength lambda_0 and all
rates in units of the single-emitter linewidth Gamma (gamma0).  The free
parameter in the vacuum-mediated kernels is xi = k_0 r = 2*pi*r/lambda_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

#: emitters closer than this (in lambda_0) make the coupling kernels blow up;
#: the random sampler rejects such configurations.
MIN_PAIR_DISTANCE = 1e-4


class DegenerateConfigurationError(RuntimeError):
    """Raised when the sampler cannot produce a configuration with all pair
    distances above ``MIN_PAIR_DISTANCE`` within the retry budget."""


def _as_unit_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"dipole axis must be a 3-vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"dipole axis must be normalized, |v| = {norm!r}")
    return v


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    """Symmetric matrix of Euclidean distances, zero diagonal."""
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def mean_separation(positions: np.ndarray) -> float:
    """Ensemble separation parameter: sum of the upper-triangle pair
    distances divided by the emitter count (not the pair count)."""
    n = positions.shape[0]
    dist = pairwise_distances(positions)
    iu = np.triu_indices(n, k=1)
    return float(np.sum(dist[iu]) / n)


@dataclass(frozen=True)
class EmitterConfiguration:
    """Positions (relative to the center of mass) and common dipole axis.

    Invariants checked at construction: at least one emitter, unit dipole
    axis, and no pair closer than ``MIN_PAIR_DISTANCE``.
    """

    positions: np.ndarray
    dipole_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (n, 3), got {pos.shape}")
        if pos.shape[0] < 1:
            raise ValueError("need at least one emitter")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        axis = _as_unit_vector(self.dipole_axis)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "dipole_axis", axis)
        if self.n >= 2:
            dist = pairwise_distances(pos)
            iu = np.triu_indices(self.n, k=1)
            dmin = dist[iu].min()
            if dmin <= MIN_PAIR_DISTANCE:
                raise DegenerateConfigurationError(
                    f"pair distance {dmin:.3e} below cutoff {MIN_PAIR_DISTANCE:g}"
                )

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def r_bar(self) -> float:
        return mean_separation(self.positions)


@dataclass(frozen=True)
class PairCoefficients:
    """Coherent couplings ``g`` and correlated emission rates ``gamma`` for
    every emitter pair, plus the geometric factors they were built from.

    ``gamma`` carries the half-linewidth gamma0/2 on its diagonal and is
    positive semidefinite; ``g`` has a zero diagonal.  Both are in units of
    gamma0's unit system (rates).
    """

    g: np.ndarray
    gamma: np.ndarray
    gamma0: float
    xi: np.ndarray
    cos_theta: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class EnsembleStats:
    """Single-reference summary statistics of a coupled ensemble.

    g_bar      sum of |g_{1n}| over partners of the first emitter
    gamma_bar  mean of gamma_{1n} over partners of the first emitter
    chi        cooperativity 2*gamma_bar/gamma0, equal to 1 in the
               fully collective (zero-separation) limit
    """

    r_bar: float
    g_bar: float
    gamma_bar: float
    chi: float


def dipole_coupling(xi, cos_theta, gamma0: float = 1.0):
    """Coherent flip-flop coupling of two dipoles at reduced distance xi.

    Vectorized over ``xi`` and ``cos_theta``.  Diverges as xi -> 0.
    """
    xi = np.asarray(xi, dtype=float)
    c2 = np.asarray(cos_theta, dtype=float) ** 2
    return (
        -0.75
        * gamma0
        * (
            (1.0 - c2) * np.cos(xi) / xi
            - (1.0 - 3.0 * c2) * (np.cos(xi) / xi**3 + np.sin(xi) / xi**2)
        )
    )


def correlated_decay(xi, cos_theta, gamma0: float = 1.0):
    """Cross-damping rate of two dipoles at reduced distance xi.

    Approaches gamma0/2 as xi -> 0 and decays like 1/xi at large xi.
    """
    xi = np.asarray(xi, dtype=float)
    c2 = np.asarray(cos_theta, dtype=float) ** 2
    return (
        0.75
        * gamma0
        * (
            (1.0 - c2) * np.sin(xi) / xi
            - (1.0 - 3.0 * c2) * (np.sin(xi) / xi**3 - np.cos(xi) / xi**2)
        )
    )


def pair_coefficients(config: EmitterConfiguration, gamma0: float = 1.0) -> PairCoefficients:
    """Evaluate the pairwise coupling and emission matrices of a configuration."""
    n = config.n
    dist = pairwise_distances(config.positions)
    xi = TWO_PI * dist
    np.fill_diagonal(xi, 0.0)

    cos_theta = np.zeros((n, n))
    if n >= 2:
        diff = config.positions[:, None, :] - config.positions[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_theta = np.einsum("mnk,k->mn", diff, config.dipole_axis) / dist
        np.fill_diagonal(cos_theta, 0.0)

    g = np.zeros((n, n))
    gamma = np.full((n, n), 0.5 * gamma0)
    if n >= 2:
        off = ~np.eye(n, dtype=bool)
        g[off] = dipole_coupling(xi[off], cos_theta[off], gamma0)
        gamma[off] = correlated_decay(xi[off], cos_theta[off], gamma0)
    # symmetrize exactly against floating-point asymmetry in the distance matrix
    g = 0.5 * (g + g.T)
    gamma = 0.5 * (gamma + gamma.T)
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(gamma, 0.5 * gamma0)
    return PairCoefficients(g=g, gamma=gamma, gamma0=gamma0, xi=xi, cos_theta=cos_theta)


def pair_dephasing_product(r12: float, gamma0: float = 1.0) -> float:
    """Dipole shift weighted by how far the pair emission is from collective,
    g12 * (1 - 2*gamma12/gamma0), for a side-by-side pair (theta = pi/2).

    Its local minimum in r12 marks the separation where dipole shifts are
    small while the emission is still strongly correlated.
    """
    if r12 <= 0:
        raise ValueError("r12 must be positive")
    xi = TWO_PI * r12
    g12 = dipole_coupling(xi, 0.0, gamma0)
    gam12 = correlated_decay(xi, 0.0, gamma0)
    return float(g12 * (1.0 - 2.0 * gam12 / gamma0))


def ensemble_stats(config: EmitterConfiguration, coeffs: PairCoefficients) -> EnsembleStats:
    """Reference-emitter statistics (emitter index 0 is the reference)."""
    if coeffs.n != config.n:
        raise ValueError("coefficients and configuration have different sizes")
    n = config.n
    if n < 2:
        return EnsembleStats(r_bar=0.0, g_bar=0.0, gamma_bar=0.0, chi=0.0)
    g_bar = float(np.sum(np.abs(coeffs.g[0, 1:])))
    gamma_bar = float(np.sum(coeffs.gamma[0, 1:]) / (n - 1))
    chi = 2.0 * gamma_bar / coeffs.gamma0
    return EnsembleStats(r_bar=config.r_bar, g_bar=g_bar, gamma_bar=gamma_bar, chi=chi)


def _rng(seed: int) -> np.random.Generator:
    # Philox: counter-based, versioned, cheap to derive independent streams from
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stateless seed mix: one 64-bit stream seed per (master seed, indices).

    Independent of any worker/thread layout, so a sweep built from these
    seeds is reproducible under any parallel schedule.
    """
    ss = np.random.SeedSequence([int(master_seed), *[int(i) for i in indices]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_random_configuration(
    n: int,
    r_bar: float,
    seed: int,
    dipole_axis=(0.0, 0.0, 1.0),
    max_retries: int = 1000,
) -> EmitterConfiguration:
    """Draw emitter positions uniformly in a ball and rescale them so the
    ensemble separation parameter equals ``r_bar`` exactly.

    Configurations with any pair closer than ``MIN_PAIR_DISTANCE`` after
    rescaling are redrawn; after ``max_retries`` failures the requested
    density is considered unreachable and an error is raised.
    """
    if n < 2:
        raise ValueError("need n >= 2 to define a separation")
    if r_bar <= 0:
        raise ValueError("r_bar must be positive")
    axis = _as_unit_vector(dipole_axis)
    rng = _rng(seed)
    for _ in range(max_retries):
        directions = rng.normal(size=(n, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = rng.random(size=(n, 1)) ** (1.0 / 3.0)
        pos = directions * radii
        current = mean_separation(pos)
        if current <= 0.0:
            continue
        pos = pos * (r_bar / current)
        pos = pos - pos.mean(axis=0)
        dist = pairwise_distances(pos)
        iu = np.triu_indices(n, k=1)
        if dist[iu].min() > MIN_PAIR_DISTANCE:
            return EmitterConfiguration(positions=pos, dipole_axis=axis)
    raise DegenerateConfigurationError(
        f"no valid configuration with n={n}, r_bar={r_bar:g} "
        f"after {max_retries} draws (r_bar too small for n?)"
    )


def circular_configuration(n: int, r_bar: float, dipole_axis=(0.0, 0.0, 1.0)) -> EmitterConfiguration:
    """Equispaced emitters on a circle in the plane perpendicular to the
    dipole axis, radius chosen so the separation parameter equals ``r_bar``.

    All pair axes are perpendicular to the dipole axis, which makes the
    coupling matrices circulant.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if r_bar <= 0:
        raise ValueError("r_bar must be positive")
    axis = _as_unit_vector(dipole_axis)
    # orthonormal in-plane basis
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = helper - (helper @ axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)

    # chord-length sum for unit circumradius: pairs at index offset d
    offsets = np.arange(1, n)
    chord_sum = np.sum((n - offsets) * 2.0 * np.sin(np.pi * offsets / n))
    radius = r_bar * n / chord_sum

    angles = TWO_PI * np.arange(n) / n
    pos = radius * (np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2)
    pos = pos - pos.mean(axis=0)
    return EmitterConfiguration(positions=pos, dipole_axis=axis)


def save_positions(config: EmitterConfiguration, path) -> None:
    """Write one ``x y z`` line per emitter (lambda_0 units)."""
    header = "dipole_axis: {:.17g} {:.17g} {:.17g}".format(*config.dipole_axis)
    np.savetxt(path, config.positions, fmt="%.17g", header=header)


def load_positions(path, dipole_axis=None) -> EmitterConfiguration:
    """Read a configuration written by :func:`save_positions`.

    The dipole axis is recovered from the header comment unless overridden.
    """
    axis = dipole_axis
    if axis is None:
        with open(path) as fh:
            for line in fh:
                if line.startswith("#") and "dipole_axis:" in line:
                    axis = [float(x) for x in line.split("dipole_axis:")[1].split()]
                    break
    if axis is None:
        axis = (0.0, 0.0, 1.0)
    pos = np.loadtxt(path, ndmin=2)
    return EmitterConfiguration(positions=pos, dipole_axis=np.asarray(axis, dtype=float))
