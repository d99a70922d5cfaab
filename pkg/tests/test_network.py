"""Topology validation, stationary vectors, ergodic limits, certificates."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsync import (
    MatrixError,
    TopologyError,
    ergodic_limit_check,
    expm,
    lyapunov_certificate,
    random_connected_topology,
    spectral_gap,
    stationary_vector,
    validate_topology,
)

SYM2 = [[-1.0, 1.0], [1.0, -1.0]]
RING3 = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]]
TWO_COMPONENTS = [
    [-1.0, 1.0, 0.0, 0.0],
    [1.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 1.0],
    [0.0, 0.0, 1.0, -1.0],
]


class TestValidateTopology:
    def test_symmetric_two_agents(self):
        topo = validate_topology(SYM2)
        assert topo.connected
        assert np.allclose(topo.r, [0.5, 0.5], atol=1e-12)

    def test_leader_follower(self):
        # arcs: only 2 -> 1; node 1 is reached from every other node
        topo = validate_topology([[0.0, 0.0], [1.0, -1.0]])
        assert topo.connected
        assert np.allclose(topo.r, [1.0, 0.0], atol=1e-12)
        assert np.allclose(topo.r @ topo.gamma, 0.0, atol=1e-15)

    def test_two_components_disconnected(self):
        topo = validate_topology(TWO_COMPONENTS)
        assert not topo.connected
        assert np.all(np.isnan(topo.r))

    def test_single_node(self):
        topo = validate_topology([[0.0]])
        assert topo.connected
        assert topo.r[0] == 1.0

    def test_tiny_negative_off_diagonal_clamped(self):
        topo = validate_topology([[-1.0, 1.0 + 1e-12], [1.0, -1.0]])
        # round-trip noise absorbed, structure intact
        assert topo.connected
        assert topo.gamma[0, 1] >= 0.0

    def test_rejects_large_negative_off_diagonal(self):
        with pytest.raises(TopologyError):
            validate_topology([[-1.0, -1.0], [1.0, -1.0]])

    def test_rejects_bad_row_sum(self):
        with pytest.raises(TopologyError):
            validate_topology([[-1.0, 2.0], [1.0, -1.0]])

    def test_rejects_non_square(self):
        with pytest.raises(MatrixError):
            validate_topology(np.ones((2, 3)))

    def test_row_sums_exactly_zero_after_normalization(self):
        gamma = np.array([[-0.3, 0.1, 0.2], [0.7, -1.4, 0.7], [0.1, 0.1, -0.2]])
        topo = validate_topology(gamma)
        assert np.all(topo.gamma @ np.ones(3) == 0.0)


class TestStationaryVector:
    def test_symmetric(self):
        assert np.allclose(stationary_vector(validate_topology(SYM2)), [0.5, 0.5])

    def test_weighted_two_agents(self):
        # solve r^T Gamma = 0 by hand: -2 r1 + r2 = 0, r1 + r2 = 1
        topo = validate_topology([[-2.0, 2.0], [1.0, -1.0]])
        assert np.allclose(stationary_vector(topo), [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)

    def test_directed_ring_uniform_by_symmetry(self):
        topo = validate_topology(RING3)
        assert np.allclose(stationary_vector(topo), np.full(3, 1.0 / 3.0), atol=1e-12)

    def test_unit_sum_exact(self):
        topo = random_connected_topology(7, 0.4, 3)
        assert stationary_vector(topo) @ np.ones(7) == 1.0

    def test_disconnected_rejected(self):
        with pytest.raises(TopologyError):
            stationary_vector(validate_topology(TWO_COMPONENTS))


class TestErgodicLimit:
    def test_two_agent_closed_form(self):
        # e^{Gamma t} = 1 r^T + e^{-2t} (I - 1 r^T) for the symmetric pair
        topo = validate_topology(SYM2)
        proj = np.eye(2) - np.outer(np.ones(2), topo.r)
        for t in (0.0, 1.0, 5.0, 20.0):
            expected = np.exp(-2.0 * t) * np.linalg.norm(proj)
            assert ergodic_limit_check(topo, t) == pytest.approx(expected, abs=1e-12)
        assert ergodic_limit_check(topo, 20.0) <= 1e-8

    def test_initial_distance_is_projector_norm(self):
        topo = random_connected_topology(5, 0.5, 11)
        proj = np.eye(5) - np.outer(np.ones(5), topo.r)
        assert ergodic_limit_check(topo, 0.0) == pytest.approx(np.linalg.norm(proj))

    def test_directed_ring_long_horizon(self):
        # nonzero spectrum of the ring has real part -3/2
        topo = validate_topology(RING3)
        assert spectral_gap(topo) == pytest.approx(1.5, abs=1e-12)
        assert ergodic_limit_check(topo, 50.0) <= 1e-8

    def test_endpoint_bound_on_random_topologies(self):
        for seed in range(10):
            topo = random_connected_topology(2 + seed % 6, 0.5, seed)
            t_end = 60.0 / spectral_gap(topo)
            assert ergodic_limit_check(topo, t_end) <= 1e-6


class TestLyapunovCertificate:
    def test_symmetric_pair_closed_form(self):
        # Gamma - 1 r^T = [[-3/2, 1/2], [1/2, -3/2]]; solving with Q = I
        # by hand gives P = [[3/8, 1/8], [1/8, 3/8]]
        cert = lyapunov_certificate(validate_topology(SYM2))
        assert np.allclose(cert.P_cert, [[0.375, 0.125], [0.125, 0.375]], atol=1e-12)

    def test_residuals_and_positivity(self):
        for seed in range(8):
            topo = random_connected_topology(2 + seed, 0.4, 100 + seed)
            cert = lyapunov_certificate(topo)
            p = topo.p
            hurwitz = topo.gamma - np.outer(np.ones(p), topo.r)
            assert np.all(np.linalg.eigvalsh(cert.P_cert) > 0)
            res = hurwitz.T @ cert.P_cert + cert.P_cert @ hurwitz + np.eye(p)
            assert np.linalg.norm(res) <= 1e-8
            res_hat = topo.gamma.T @ cert.P_hat + cert.P_hat @ topo.gamma + cert.Q_hat
            assert np.linalg.norm(res_hat) <= 1e-8

    def test_projected_certificate_annihilates_ones(self):
        cert = lyapunov_certificate(random_connected_topology(6, 0.6, 2))
        assert np.allclose(cert.P_hat @ np.ones(6), 0.0, atol=1e-12)

    def test_disconnected_rejected(self):
        with pytest.raises(TopologyError):
            lyapunov_certificate(validate_topology(TWO_COMPONENTS))


class TestRandomTopology:
    def test_single_agent(self):
        topo = random_connected_topology(1, 0.5, 0)
        assert topo.gamma.shape == (1, 1) and topo.gamma[0, 0] == 0.0

    def test_deterministic_in_seed(self):
        a = random_connected_topology(5, 0.5, 42)
        b = random_connected_topology(5, 0.5, 42)
        assert np.array_equal(a.gamma, b.gamma)

    @settings(max_examples=40, deadline=None)
    @given(p=st.integers(1, 10), density=st.floats(0.05, 1.0), seed=st.integers(0, 9999))
    def test_always_connected_and_valid(self, p, density, seed):
        topo = random_connected_topology(p, density, seed)
        assert topo.connected
        assert np.all(topo.gamma @ np.ones(p) == 0.0)
        off = topo.gamma.copy()
        np.fill_diagonal(off, 0.0)
        assert np.all(off >= 0.0)

    def test_rejects_bad_parameters(self):
        with pytest.raises(TopologyError):
            random_connected_topology(0, 0.5, 1)
        with pytest.raises(TopologyError):
            random_connected_topology(3, 0.0, 1)


class TestSpectralStructure:
    def test_stationary_vector_annihilates_gamma(self):
        for seed in range(10):
            topo = random_connected_topology(3 + seed % 5, 0.5, 7 * seed)
            bound = 1e-10 * max(1.0, np.linalg.norm(topo.gamma))
            assert np.linalg.norm(topo.r @ topo.gamma) <= bound

    def test_nonzero_spectrum_strictly_stable(self):
        for seed in range(10):
            topo = random_connected_topology(2 + seed % 6, 0.4, 50 + seed)
            values = np.linalg.eigvals(topo.gamma)
            nonzero = np.delete(values, np.argmin(np.abs(values)))
            if nonzero.size:
                assert np.max(nonzero.real) < -1e-10

    def test_shifted_power_identity(self):
        # (Gamma - 1 r^T)^k = Gamma^k + (-1)^k 1 r^T
        for seed in range(6):
            topo = random_connected_topology(4 + seed % 4, 0.5, 900 + seed)
            ones_rt = np.outer(np.ones(topo.p), topo.r)
            shifted = topo.gamma - ones_rt
            scale = max(1.0, np.linalg.norm(topo.gamma))
            for k in range(1, 5):
                lhs = np.linalg.matrix_power(shifted, k)
                rhs = np.linalg.matrix_power(topo.gamma, k) + (-1.0) ** k * ones_rt
                assert np.linalg.norm(lhs - rhs) <= 1e-9 * scale**k

    def test_shifted_exponential_identity(self):
        # e^{(Gamma - 1 r^T) t} = e^{Gamma t} - (1 - e^{-t}) 1 r^T
        for seed in range(6):
            topo = random_connected_topology(3 + seed % 5, 0.5, 400 + seed)
            ones_rt = np.outer(np.ones(topo.p), topo.r)
            for t in (0.5, 1.0, 2.0):
                lhs = expm(topo.gamma - ones_rt, t)
                rhs = expm(topo.gamma, t) - (1.0 - np.exp(-t)) * ones_rt
                assert np.linalg.norm(lhs - rhs) <= 1e-9
