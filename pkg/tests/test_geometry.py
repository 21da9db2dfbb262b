import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from coopforce import geometry as geo


def taylor_correlated_decay(xi, cos_theta, order=6):
    """Small-xi series of the cross-damping kernel, independent of the
    closed-form implementation (series of sin/cos assembled termwise)."""
    c2 = cos_theta**2
    # sin(x)/x = 1 - x^2/6 + x^4/120 ; sin(x)/x^3 - cos(x)/x^2 via series
    sin_over_x = 1 - xi**2 / 6 + xi**4 / 120 - xi**6 / 5040
    sin_over_x3 = (1 - xi**2 / 6 + xi**4 / 120 - xi**6 / 5040) / xi**2
    cos_over_x2 = (1 - xi**2 / 2 + xi**4 / 24 - xi**6 / 720) / xi**2
    return 0.75 * ((1 - c2) * sin_over_x - (1 - 3 * c2) * (sin_over_x3 - cos_over_x2))


class TestKernels:
    def test_small_separation_limit_taylor_oracle(self):
        for xi in [1e-3, 1e-2, 0.1]:
            for c in [0.0, 0.4, 0.9]:
                want = taylor_correlated_decay(xi, c)
                got = geo.correlated_decay(xi, c)
                assert got == pytest.approx(want, rel=1e-8)
        # xi -> 0 approaches half the linewidth for any orientation
        assert geo.correlated_decay(1e-4, 0.77) == pytest.approx(0.5, abs=1e-7)

    def test_far_field_decay(self):
        for c in [0.0, 0.5, 1.0]:
            assert abs(geo.dipole_coupling(100.0, c)) < 0.01
            assert abs(geo.correlated_decay(100.0, c)) < 0.01

    def test_side_on_near_field_divergence(self):
        # leading order +3/(4 xi^3) at theta = pi/2
        for xi in [1e-3, 1e-2]:
            got = geo.dipole_coupling(xi, 0.0)
            assert got == pytest.approx(0.75 / xi**3, rel=1e-3)
            assert got > 0

    def test_cross_damping_bounded_by_half(self):
        xi = np.linspace(1e-3, 60.0, 4001)
        for c in [0.0, 0.3, 0.8, 1.0]:
            vals = geo.correlated_decay(xi, c)
            assert np.all(np.abs(vals) <= 0.5 + 1e-9)


class TestSampler:
    def test_seeded_determinism(self):
        a = geo.sample_random_configuration(6, 0.2, seed=12345)
        b = geo.sample_random_configuration(6, 0.2, seed=12345)
        assert np.array_equal(a.positions, b.positions)

    def test_different_seed_differs(self):
        a = geo.sample_random_configuration(6, 0.2, seed=1)
        b = geo.sample_random_configuration(6, 0.2, seed=2)
        assert not np.array_equal(a.positions, b.positions)

    def test_exact_rescale_n2(self):
        cfg = geo.sample_random_configuration(2, 0.1, seed=7)
        r12 = geo.pairwise_distances(cfg.positions)[0, 1]
        assert cfg.r_bar == pytest.approx(0.1, abs=1e-12)
        assert r12 / 2 == pytest.approx(0.1, abs=1e-12)

    @given(
        n=hst.integers(min_value=2, max_value=8),
        r_bar=hst.floats(min_value=0.01, max_value=5.0),
        seed=hst.integers(min_value=0, max_value=2**63 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_rescale_exact_property(self, n, r_bar, seed):
        cfg = geo.sample_random_configuration(n, r_bar, seed=seed)
        assert abs(cfg.r_bar - r_bar) < 1e-12 * max(1.0, r_bar)
        dist = geo.pairwise_distances(cfg.positions)
        iu = np.triu_indices(n, k=1)
        assert dist[iu].min() > geo.MIN_PAIR_DISTANCE

    def test_cutoff_enforced(self):
        # r_bar so small that every draw violates the minimum pair distance
        with pytest.raises(geo.DegenerateConfigurationError):
            geo.sample_random_configuration(6, 1e-5, seed=3, max_retries=50)

    def test_center_of_mass_removed(self):
        cfg = geo.sample_random_configuration(5, 0.4, seed=11)
        assert np.abs(cfg.positions.mean(axis=0)).max() < 1e-14


class TestCircle:
    def test_square_chord_ratios(self):
        cfg = geo.circular_configuration(4, 0.3)
        d = geo.pairwise_distances(cfg.positions)
        side, diag = d[0, 1], d[0, 2]
        assert diag / side == pytest.approx(np.sqrt(2.0), rel=1e-12)
        assert cfg.r_bar == pytest.approx(0.3, rel=1e-12)
        # scale fixed by (4*side + 2*diag)/4 = r_bar
        assert (4 * side + 2 * diag) / 4 == pytest.approx(0.3, rel=1e-12)

    def test_pair_is_antipodal_and_side_on(self):
        cfg = geo.circular_configuration(2, 0.25)
        d = geo.pairwise_distances(cfg.positions)[0, 1]
        assert d == pytest.approx(2 * 0.25, rel=1e-12)
        co = geo.pair_coefficients(cfg)
        assert co.cos_theta[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_couplings_circulant(self):
        cfg = geo.circular_configuration(6, 0.2)
        co = geo.pair_coefficients(cfg)
        for mat in (co.g, co.gamma):
            rolled = np.roll(np.roll(mat, 1, axis=0), 1, axis=1)
            assert np.allclose(mat, rolled, atol=1e-12)

    def test_plane_perpendicular_to_axis(self):
        axis = np.array([1.0, 2.0, 2.0]) / 3.0
        cfg = geo.circular_configuration(5, 0.3, dipole_axis=axis)
        assert np.abs(cfg.positions @ axis).max() < 1e-14


class TestPairCoefficients:
    def test_symmetry_and_diagonals(self, rng):
        for _ in range(20):
            cfg = geo.sample_random_configuration(
                int(rng.integers(2, 7)), float(rng.uniform(0.05, 2.0)),
                seed=int(rng.integers(2**63)),
            )
            co = geo.pair_coefficients(cfg)
            assert np.array_equal(co.g, co.g.T)
            assert np.array_equal(co.gamma, co.gamma.T)
            assert np.all(np.diag(co.g) == 0.0)
            assert np.all(np.diag(co.gamma) == 0.5)
            off = ~np.eye(cfg.n, dtype=bool)
            assert np.all(np.abs(co.gamma[off]) <= 0.5 + 1e-9)

    def test_gamma_positive_semidefinite(self, rng):
        for _ in range(50):
            cfg = geo.sample_random_configuration(
                int(rng.integers(2, 8)), float(rng.uniform(0.03, 3.0)),
                seed=int(rng.integers(2**63)),
            )
            co = geo.pair_coefficients(cfg)
            assert np.linalg.eigvalsh(co.gamma).min() >= -1e-9

    def test_translation_and_axial_rotation_invariance(self):
        cfg = geo.sample_random_configuration(5, 0.3, seed=21)
        co = geo.pair_coefficients(cfg)
        shifted = geo.EmitterConfiguration(
            positions=cfg.positions + np.array([0.7, -1.2, 3.4]),
            dipole_axis=cfg.dipole_axis,
        )
        co_shift = geo.pair_coefficients(shifted)
        assert np.allclose(co.g, co_shift.g, rtol=1e-12, atol=1e-12)
        assert np.allclose(co.gamma, co_shift.gamma, rtol=1e-12, atol=1e-12)
        # rotation about the dipole axis (z)
        phi = 0.853
        rot = np.array(
            [[np.cos(phi), -np.sin(phi), 0], [np.sin(phi), np.cos(phi), 0], [0, 0, 1]]
        )
        rotated = geo.EmitterConfiguration(
            positions=cfg.positions @ rot.T, dipole_axis=cfg.dipole_axis
        )
        co_rot = geo.pair_coefficients(rotated)
        assert np.allclose(co.g, co_rot.g, rtol=1e-10, atol=1e-12)
        assert np.allclose(co.gamma, co_rot.gamma, rtol=1e-10, atol=1e-12)


class TestDephasingProduct:
    def test_local_minimum_near_fifth_wavelength(self):
        rs = np.linspace(0.05, 0.5, 901)
        vals = np.array([geo.pair_dephasing_product(r) for r in rs])
        interior = [
            rs[i]
            for i in range(1, len(rs) - 1)
            if vals[i] < vals[i - 1] and vals[i] < vals[i + 1]
        ]
        assert len(interior) >= 1
        assert abs(interior[0] - 0.2) <= 0.02

    def test_divergence_at_contact(self):
        assert geo.pair_dephasing_product(1e-3) > 1e6

    def test_far_field_small(self):
        assert abs(geo.pair_dephasing_product(10.0)) < 1e-2


class TestEnsembleStats:
    def test_collective_limit_chi_to_one(self):
        positions = np.zeros((4, 3))
        positions[:, 0] = np.arange(4) * 2.5e-4
        cfg = geo.EmitterConfiguration(positions=positions - positions.mean(axis=0))
        st = geo.ensemble_stats(cfg, geo.pair_coefficients(cfg))
        assert st.chi == pytest.approx(1.0, abs=1e-5)
        assert st.chi <= 1 + 1e-9

    def test_far_separated_decouples(self):
        cfg = geo.sample_random_configuration(4, 100.0, seed=9)
        st = geo.ensemble_stats(cfg, geo.pair_coefficients(cfg))
        assert st.g_bar < 1e-2
        assert st.chi < 1e-2

    def test_pair_separation_definition(self):
        cfg = geo.sample_random_configuration(2, 0.37, seed=5)
        st = geo.ensemble_stats(cfg, geo.pair_coefficients(cfg))
        r12 = geo.pairwise_distances(cfg.positions)[0, 1]
        assert st.r_bar == pytest.approx(r12 / 2, rel=1e-14)


def test_positions_roundtrip(tmp_path):
    axis = np.array([0.0, 0.6, 0.8])
    cfg = geo.sample_random_configuration(5, 0.3, seed=17, dipole_axis=axis)
    path = tmp_path / "positions.txt"
    geo.save_positions(cfg, path)
    loaded = geo.load_positions(path)
    assert np.allclose(loaded.positions, cfg.positions, atol=1e-15)
    assert np.allclose(loaded.dipole_axis, axis, atol=1e-15)
