import numpy as np
import pytest

from risklqr import (
    DefinitenessError,
    DimensionError,
    InstabilityError,
    NonConvergenceError,
    solve_dare,
    solve_discrete_lyapunov,
    spectral_radius,
)
from risklqr.linalg import riccati_gain

from conftest import lyapunov_series_oracle, spectral_radius_oracle


class TestSpectralRadius:
    def test_identity(self):
        for n in range(1, 6):
            assert spectral_radius(np.eye(n)) == pytest.approx(1.0, abs=1e-12)

    def test_uav_open_loop_is_marginally_stable(self, uav):
        system, _, _, _ = uav
        assert spectral_radius(system.A) == pytest.approx(1.0, abs=1e-12)

    def test_uav_initial_gain_is_stabilizing(self, uav):
        system, _, _, policy = uav
        Acl = system.A - system.B @ policy.K
        rho = spectral_radius(Acl)
        oracle = spectral_radius_oracle(Acl)
        assert rho < 1.0
        assert rho == pytest.approx(oracle, rel=1e-8)

    def test_agrees_with_companion_oracle_on_random_matrices(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            M = rng.standard_normal((n, n)) * rng.uniform(0.1, 3.0)
            assert spectral_radius(M) == pytest.approx(
                spectral_radius_oracle(M), rel=1e-8, abs=1e-10
            )

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            spectral_radius(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(DimensionError):
            spectral_radius(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestDiscreteLyapunov:
    def test_zero_dynamics_returns_rhs(self):
        W = np.array([[2.0, 0.5], [0.5, 1.0]])
        S = solve_discrete_lyapunov(np.zeros((2, 2)), W)
        np.testing.assert_allclose(S, W, rtol=0, atol=1e-15)

    def test_scalar_geometric_series(self):
        # a = 0.5, W = 1: S = sum a^(2k) = 1 / (1 - 0.25) = 4/3
        S = solve_discrete_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
        assert S[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-12)

    def test_uav_closed_loop_matches_series_oracle(self, uav):
        system, noise, _, policy = uav
        Acl = system.A - system.B @ policy.K
        S = solve_discrete_lyapunov(Acl, noise.W)
        ref = lyapunov_series_oracle(Acl, noise.W)
        np.testing.assert_allclose(S, ref, rtol=0, atol=1e-9)

    def test_random_stable_pairs_residual_and_series(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            M = rng.standard_normal((n, n))
            M *= rng.uniform(0.1, 0.95) / max(spectral_radius(M), 1e-12)
            C = rng.standard_normal((n, n))
            W = C @ C.T
            S = solve_discrete_lyapunov(M, W)
            resid = np.linalg.norm(S - W - M @ S @ M.T, "fro")
            assert resid <= 1e-10 * max(1.0, np.linalg.norm(S, "fro"))
            np.testing.assert_allclose(S, lyapunov_series_oracle(M, W), rtol=0, atol=1e-8)
            np.testing.assert_allclose(S, S.T, rtol=0, atol=0)

    def test_unstable_dynamics_rejected(self):
        with pytest.raises(InstabilityError):
            solve_discrete_lyapunov(np.array([[1.0]]), np.array([[1.0]]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            solve_discrete_lyapunov(np.eye(2) * 0.5, np.eye(3))

    def test_asymmetric_rhs_rejected(self):
        with pytest.raises(DimensionError):
            solve_discrete_lyapunov(np.eye(2) * 0.5, np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestDare:
    def test_zero_dynamics_returns_weight(self):
        Q = np.diag([2.0, 3.0])
        P = solve_dare(np.zeros((2, 2)), np.eye(2), Q, np.eye(2))
        np.testing.assert_allclose(P, Q, rtol=0, atol=1e-12)

    def test_scalar_golden_ratio(self):
        # p = 1 + p - p^2/(1+p) reduces to p^2 = 1 + p, so p is the golden ratio.
        P = solve_dare(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]))
        assert P[0, 0] == pytest.approx((1.0 + np.sqrt(5.0)) / 2.0, abs=1e-10)

    def test_uav_riccati_residual(self, uav_rl):
        sys = uav_rl.sys
        P = solve_dare(sys.A, sys.B, uav_rl.Qmu, sys.R)
        K = riccati_gain(sys.A, sys.B, P, sys.R)
        resid = P - (uav_rl.Qmu + sys.A.T @ P @ sys.A - sys.A.T @ P @ sys.B @ K)
        rel = np.linalg.norm(resid, "fro") / max(1.0, np.linalg.norm(P, "fro"))
        assert rel <= 1e-9

    def test_random_stabilizable_pairs(self):
        rng = np.random.default_rng(11)
        done = 0
        while done < 100:
            n = int(rng.integers(1, 7))
            m = int(rng.integers(1, 4))
            A = rng.standard_normal((n, n))
            A *= rng.uniform(0.3, 1.2) / max(spectral_radius(A), 1e-12)
            B = rng.standard_normal((n, m))
            C = rng.standard_normal((n, n)) / np.sqrt(n)
            Q = C @ C.T + 0.05 * np.eye(n)
            R = np.eye(m)
            try:
                P = solve_dare(A, B, Q, R)
            except NonConvergenceError:
                continue
            K = riccati_gain(A, B, P, R)
            resid = P - (Q + A.T @ P @ A - A.T @ P @ B @ K)
            assert np.linalg.norm(resid, "fro") <= 1e-9 * max(1.0, np.linalg.norm(P, "fro"))
            assert spectral_radius(A - B @ K) < 1.0
            done += 1

    def test_non_stabilizable_pair_raises(self):
        with pytest.raises(NonConvergenceError):
            solve_dare(np.array([[2.0]]), np.array([[0.0]]), np.array([[1.0]]), np.array([[1.0]]))

    def test_indefinite_weight_rejected(self):
        with pytest.raises(DefinitenessError):
            solve_dare(np.eye(2) * 0.5, np.eye(2), -np.eye(2), np.eye(2))

    def test_non_pd_input_cost_rejected(self):
        with pytest.raises(DefinitenessError):
            solve_dare(np.eye(2) * 0.5, np.eye(2), np.eye(2), np.zeros((2, 2)))
