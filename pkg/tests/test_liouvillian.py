import dataclasses

import numpy as np
import pytest

from coopforce import geometry as geo
from coopforce import operators as ops
from coopforce.liouvillian import (
    DriveParams,
    ExactSizeError,
    MasterEquationSpec,
    apply_liouvillian,
    build_hamiltonian,
    build_liouvillian,
    expectation,
    validate_density_matrix,
)

from conftest import random_master_spec, uncoupled_coeffs


def single_emitter_spec(omega0, delta, gamma_c, gamma0=1.0):
    cfg = geo.EmitterConfiguration(positions=np.zeros((1, 3)))
    return MasterEquationSpec(
        DriveParams(omega0, delta), gamma_c, geo.pair_coefficients(cfg, gamma0)
    )


class TestHamiltonian:
    def test_single_emitter_detuning_diagonal(self):
        h = build_hamiltonian(single_emitter_spec(0.0, 2.0, 0.0))
        assert np.allclose(np.diag(h), [-1.0, 1.0])
        assert np.allclose(h, np.diag(np.diag(h)))

    def test_pair_exchange_block_eigenvalues(self):
        cfg = geo.sample_random_configuration(2, 0.2, seed=3)
        coeffs = geo.pair_coefficients(cfg)
        spec = MasterEquationSpec(DriveParams(0.0, 0.0), 0.0, coeffs)
        evals = np.sort(np.linalg.eigvalsh(build_hamiltonian(spec)))
        g = abs(coeffs.g[0, 1])
        # 2x2 single-excitation block diagonalizes to +-g; the ends stay at 0
        assert np.allclose(evals, [-g, 0.0, 0.0, g], atol=1e-12)

    def test_hermitian(self, rng):
        for n in (1, 2, 3):
            h = build_hamiltonian(random_master_spec(rng, n))
            assert np.abs(h - h.conj().T).max() < 1e-12


class TestLiouvillian:
    def test_trace_preservation(self, rng):
        for n in (1, 2, 3):
            spec = random_master_spec(rng, n)
            lv = build_liouvillian(spec)
            one = ops.vec(np.eye(2**n))
            scale = np.abs(lv.toarray()).max()
            assert np.abs(one @ lv.toarray()).max() <= 1e-10 * max(scale, 1.0)

    def test_hermiticity_preservation(self, rng):
        for n in (1, 2, 3):
            spec = random_master_spec(rng, n)
            d = 2**n
            m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            rho = m + m.conj().T
            out = apply_liouvillian(spec, rho)
            assert np.abs(out - out.conj().T).max() < 1e-10 * max(
                1.0, np.abs(out).max()
            )

    def test_apply_matches_assembled_matrix(self, rng):
        spec = random_master_spec(rng, 3)
        lv = build_liouvillian(spec).toarray()
        for _ in range(100):
            m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
            direct = apply_liouvillian(spec, m)
            via_matrix = ops.unvec(lv @ ops.vec(m))
            assert np.abs(direct - via_matrix).max() < 1e-12 * max(
                1.0, np.abs(via_matrix).max()
            )

    def test_size_limit(self):
        cfg = geo.sample_random_configuration(7, 0.5, seed=1)
        spec = MasterEquationSpec(
            DriveParams(1.0, 0.0), 0.0, geo.pair_coefficients(cfg)
        )
        with pytest.raises(ExactSizeError):
            build_liouvillian(spec)

    def test_dephasing_annihilates_exactly_the_sector_diagonal_dyads(self):
        # pure dephasing acts on |i><j| with rate (Sz_i - Sz_j)^2, so a basis
        # dyad is stationary exactly when both states share a total inversion
        n = 3
        d = 2**n
        cfg = geo.sample_random_configuration(n, 0.4, seed=2)
        coeffs = dataclasses.replace(
            geo.pair_coefficients(cfg),
            g=np.zeros((n, n)),
            gamma=np.zeros((n, n)),
        )
        spec = MasterEquationSpec(DriveParams(0.0, 0.0), 3.7, coeffs)
        sz_diag = np.real(np.diag(ops.spin_ops(n)["SZ"].toarray()))
        for i in range(d):
            for j in range(d):
                dyad = np.zeros((d, d), dtype=complex)
                dyad[i, j] = 1.0
                out = apply_liouvillian(spec, dyad)
                if sz_diag[i] == sz_diag[j]:
                    assert np.abs(out).max() < 1e-14
                else:
                    assert np.abs(out).max() > 1e-3


class TestExpectation:
    def test_maximally_mixed_has_no_polarization(self):
        n = 2
        rho = np.eye(4) / 4
        assert expectation(rho, ops.spin_ops(n)["SX"]) == 0.0

    def test_all_ground_inversion(self):
        n = 3
        d = 2**n
        rho = np.zeros((d, d), dtype=complex)
        rho[d - 1, d - 1] = 1.0
        assert expectation(rho, ops.spin_ops(n)["SZ"]) == pytest.approx(-3.0)

    def test_non_hermitian_detected(self):
        rho = np.array([[0.5, 0.5j], [0.5j, 0.5]])
        with pytest.raises(ValueError, match="imaginary"):
            expectation(rho, ops.SIGMA_X)


def test_validate_density_matrix_rejects_bad_states():
    good = np.diag([0.25, 0.75]).astype(complex)
    validate_density_matrix(good)
    with pytest.raises(ValueError, match="Hermitian"):
        validate_density_matrix(np.array([[0.5, 1e-5], [0.0, 0.5]]))
    with pytest.raises(ValueError, match="trace"):
        validate_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError, match="negative"):
        validate_density_matrix(np.diag([1.1, -0.1]))
