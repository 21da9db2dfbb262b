import dataclasses

import numpy as np
import pytest

from coopforce import geometry as geo
from coopforce.liouvillian import DriveParams, MasterEquationSpec


def random_master_spec(rng, n, max_rate=10.0):
    """Random well-conditioned master-equation spec for invariant tests."""
    r_bar = rng.uniform(0.08, 1.5)
    cfg = geo.sample_random_configuration(n, r_bar, seed=int(rng.integers(2**63)))
    coeffs = geo.pair_coefficients(cfg)
    drive = DriveParams(
        omega0=float(rng.uniform(0, max_rate)), delta=float(rng.uniform(-max_rate, max_rate))
    )
    return MasterEquationSpec(drive, float(rng.uniform(0, max_rate)), coeffs)


def uncoupled_coeffs(n, gamma0=1.0):
    """Pair coefficients of n far-separated (independent) emitters."""
    positions = np.zeros((n, 3))
    positions[:, 0] = np.arange(n) * 1e6
    cfg = geo.EmitterConfiguration(positions=positions)
    co = geo.pair_coefficients(cfg, gamma0)
    return dataclasses.replace(
        co, g=np.zeros((n, n)), gamma=np.eye(n) * (0.5 * gamma0)
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)
