import numpy as np
import pytest

from risklqr import DimensionError, LinearSystem, Policy, closed_loop, is_stabilizing


def scalar_system(a=2.0, b=1.0):
    return LinearSystem(A=np.array([[a]]), B=np.array([[b]]), Q=np.eye(1), R=np.eye(1))


class TestPolicyValue:
    def test_matrix_round_trip_is_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            K = rng.standard_normal((2, 4))
            l = rng.standard_normal(2)
            p = Policy(K=K, l=l)
            q = Policy.from_matrix(p.as_matrix())
            assert np.array_equal(q.K, p.K)
            assert np.array_equal(q.l, p.l)

    def test_augmented_shape(self):
        p = Policy(K=np.ones((2, 4)), l=np.zeros(2))
        assert p.as_matrix().shape == (2, 5)

    def test_dimension_validation(self):
        with pytest.raises(DimensionError):
            Policy(K=np.ones((2, 4)), l=np.zeros(3))


class TestApply:
    def test_zero_state_returns_offset(self):
        p = Policy(K=np.ones((2, 3)), l=np.array([1.0, -2.0]))
        np.testing.assert_array_equal(p.apply(np.zeros(3)), p.l)

    def test_zero_gain_returns_offset_everywhere(self):
        p = Policy(K=np.zeros((2, 3)), l=np.array([0.5, 0.25]))
        rng = np.random.default_rng(1)
        for _ in range(5):
            np.testing.assert_array_equal(p.apply(rng.standard_normal(3)), p.l)

    def test_uav_hand_arithmetic(self, uav):
        _, _, _, policy = uav
        u = policy.apply(np.ones(4))
        np.testing.assert_allclose(u, [-7.0, -1.0], rtol=0, atol=0)

    def test_affine_in_the_state(self):
        rng = np.random.default_rng(2)
        p = Policy(K=rng.standard_normal((2, 4)), l=rng.standard_normal(2))
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        for alpha in (0.0, 0.25, 0.5, 1.0):
            blend = p.apply(alpha * x + (1 - alpha) * y)
            expect = alpha * p.apply(x) + (1 - alpha) * p.apply(y)
            np.testing.assert_allclose(blend, expect, atol=1e-12)

    def test_dimension_mismatch(self):
        p = Policy(K=np.ones((2, 3)), l=np.zeros(2))
        with pytest.raises(DimensionError):
            p.apply(np.zeros(4))


class TestIsStabilizing:
    def test_uav_initial_policy(self, uav):
        system, _, _, policy = uav
        assert is_stabilizing(system, policy)

    def test_zero_gain_on_uav_is_not_stabilizing(self, uav):
        system, _, _, _ = uav
        p = Policy(K=np.zeros((2, 4)), l=np.zeros(2))
        assert not is_stabilizing(system, p)

    def test_scalar_modulus(self):
        system = scalar_system(a=2.0, b=1.0)
        assert is_stabilizing(system, Policy(K=np.array([[1.5]]), l=np.zeros(1)))
        assert not is_stabilizing(system, Policy(K=np.array([[0.5]]), l=np.zeros(1)))

    def test_margin(self):
        system = scalar_system(a=2.0, b=1.0)
        p = Policy(K=np.array([[1.1]]), l=np.zeros(1))  # closed loop 0.9
        assert is_stabilizing(system, p, margin=0.05)
        assert not is_stabilizing(system, p, margin=0.15)

    def test_invariant_under_matrix_round_trip(self, uav):
        system, _, _, policy = uav
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = Policy.from_matrix(policy.as_matrix() + 0.2 * rng.standard_normal((2, 5)))
            assert is_stabilizing(system, q) == is_stabilizing(
                system, Policy.from_matrix(q.as_matrix())
            )

    def test_closed_loop_shape_mismatch(self, uav):
        system, _, _, _ = uav
        with pytest.raises(DimensionError):
            closed_loop(system, Policy(K=np.ones((2, 3)), l=np.zeros(2)))
