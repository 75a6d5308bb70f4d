import numpy as np
import pytest
from scipy.spatial.transform import Rotation as ScipyRotation

from ransic.exceptions import DegenerateInput
from ransic.geometry import (
    geodesic_distance,
    quaternion_to_matrix,
    random_rotation,
    solve_rotation_svd,
    solve_sim_transform,
    weighted_scale,
)


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


class TestGeodesicDistance:
    def test_identity_is_zero(self):
        assert geodesic_distance(np.eye(3), np.eye(3)) == 0.0

    def test_known_angle(self):
        for angle in (0.1, 0.5, 1.0, np.pi / 2, 3.0):
            d = geodesic_distance(np.eye(3), rot_x(angle))
            assert d == pytest.approx(angle, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            r1, r2 = random_rotation(rng), random_rotation(rng)
            assert geodesic_distance(r1, r2) == geodesic_distance(r2, r1)

    def test_left_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            r1, r2, g = (random_rotation(rng) for _ in range(3))
            d1 = geodesic_distance(r1, r2)
            d2 = geodesic_distance(g @ r1, g @ r2)
            assert d2 == pytest.approx(d1, abs=1e-9)

    def test_matches_scipy(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            r1, r2 = random_rotation(rng), random_rotation(rng)
            expected = ScipyRotation.from_matrix(r1.T @ r2).magnitude()
            assert geodesic_distance(r1, r2) == pytest.approx(expected, abs=1e-9)

    def test_clamped_near_pi(self):
        # trace can dip under -1 by rounding; acos must not produce NaN
        r = rot_x(np.pi)
        d = geodesic_distance(np.eye(3), r)
        assert np.isfinite(d) and d == pytest.approx(np.pi, abs=1e-9)

    def test_range(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            d = geodesic_distance(random_rotation(rng), random_rotation(rng))
            assert 0.0 <= d <= np.pi


class TestSolveRotationSvd:
    def test_exact_recovery(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            r = random_rotation(rng)
            src = rng.normal(size=(10, 3))
            est = solve_rotation_svd(src, src @ r.T)
            assert geodesic_distance(est, r) < 1e-7

    def test_two_point_minimal(self):
        rng = np.random.default_rng(5)
        r = random_rotation(rng)
        src = np.array([[1.0, 0, 0], [0, 1.0, 0]])
        est = solve_rotation_svd(src, src @ r.T)
        assert geodesic_distance(est, r) < 1e-7

    def test_proper_rotation_always(self):
        # near-reflection data must still give det +1
        rng = np.random.default_rng(6)
        for _ in range(50):
            src = rng.normal(size=(4, 3))
            dst = rng.normal(size=(4, 3))
            est = solve_rotation_svd(src, dst)
            assert np.linalg.det(est) == pytest.approx(1.0, abs=1e-9)
            assert np.allclose(est @ est.T, np.eye(3), atol=1e-9)

    def test_rejects_single_pair(self):
        with pytest.raises(DegenerateInput):
            solve_rotation_svd(np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))

    def test_rejects_parallel_sources(self):
        src = np.array([[1.0, 0, 0], [2.0, 0, 0]])
        dst = np.array([[0, 1.0, 0], [0, 0, 1.0]])
        with pytest.raises(DegenerateInput):
            solve_rotation_svd(src, dst)

    def test_rejects_antiparallel_sources(self):
        src = np.array([[1.0, 0, 0], [-3.0, 0, 0]])
        dst = np.array([[0, 1.0, 0], [0, 0, 1.0]])
        with pytest.raises(DegenerateInput):
            solve_rotation_svd(src, dst)

    def test_noisy_least_squares(self):
        rng = np.random.default_rng(7)
        r = random_rotation(rng)
        src = rng.normal(size=(100, 3))
        dst = src @ r.T + rng.normal(scale=0.01, size=(100, 3))
        est = solve_rotation_svd(src, dst)
        assert geodesic_distance(est, r) < 0.01


class TestWeightedScale:
    def test_hand_example(self):
        # src norms (1, 2), dst norms (2.0, 4.12):
        # (1*2.0 + 2*4.12) / (1 + 4) = 10.24 / 5 = 2.048
        s = weighted_scale(np.array([1.0, 2.0]), np.array([2.0, 4.12]))
        assert s == pytest.approx(2.048, abs=1e-15)

    def test_exact_when_consistent(self):
        rng = np.random.default_rng(8)
        src_n = rng.uniform(0.5, 2.0, size=30)
        s = weighted_scale(src_n, 3.7 * src_n)
        assert s == pytest.approx(3.7, abs=1e-12)

    def test_weights_favor_long_vectors(self):
        # ratios are 2 and 3; the longer source must dominate
        s = weighted_scale(np.array([1.0, 10.0]), np.array([2.0, 30.0]))
        assert abs(s - 3.0) < abs(s - 2.0)


class TestSolveSimTransform:
    def test_exact_recovery_unknown_scale(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            r = random_rotation(rng)
            s = rng.uniform(0.3, 4.0)
            t = rng.normal(size=3)
            src = rng.normal(size=(8, 3))
            dst = s * src @ r.T + t
            s_est, r_est, t_est = solve_sim_transform(src, dst)
            assert s_est == pytest.approx(s, abs=1e-9)
            assert geodesic_distance(r_est, r) < 1e-7
            assert np.allclose(t_est, t, atol=1e-9)

    def test_exact_recovery_known_scale(self):
        rng = np.random.default_rng(10)
        r = random_rotation(rng)
        t = rng.normal(size=3)
        src = rng.normal(size=(6, 3))
        dst = src @ r.T + t
        s_est, r_est, t_est = solve_sim_transform(src, dst, known_scale=1.0)
        assert s_est == 1.0
        assert geodesic_distance(r_est, r) < 1e-7
        assert np.allclose(t_est, t, atol=1e-9)

    def test_three_point_minimal(self):
        rng = np.random.default_rng(11)
        r = random_rotation(rng)
        src = rng.normal(size=(3, 3))
        dst = 2.5 * src @ r.T + np.array([1.0, -2.0, 0.5])
        s_est, r_est, t_est = solve_sim_transform(src, dst)
        assert s_est == pytest.approx(2.5, abs=1e-9)
        assert geodesic_distance(r_est, r) < 1e-7

    def test_rejects_colinear_points(self):
        src = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
        dst = np.array([[0.0, 1, 0], [1.0, 1, 0], [2.0, 1, 0]])
        with pytest.raises(DegenerateInput):
            solve_sim_transform(src, dst)

    def test_rejects_under_three_points(self):
        src = np.array([[1.0, 0, 0], [0, 1.0, 0]])
        with pytest.raises(DegenerateInput):
            solve_sim_transform(src, src)

    def test_colinear_check_uses_shortest_spans(self):
        # two long colinear arms plus one point barely off the line:
        # the two shortest demeaned vectors decide, so this must pass
        src = np.array([[-10.0, 0, 0], [10.0, 0, 0], [0.1, 0.1, 0], [-0.1, 0.2, 0.1]])
        rng = np.random.default_rng(12)
        r = random_rotation(rng)
        dst = 1.5 * src @ r.T + np.array([0.3, 0, -1.0])
        s_est, r_est, _ = solve_sim_transform(src, dst)
        assert s_est == pytest.approx(1.5, abs=1e-9)
        assert geodesic_distance(r_est, r) < 1e-8

    def test_scale_is_norm_weighted(self):
        # the scale estimate is sum(|p~||q~|)/sum(|p~|^2) on demeaned
        # vectors, independent of the rotation fit, so it must agree with
        # the closed form even on completely unrelated point sets
        rng = np.random.default_rng(16)
        for _ in range(20):
            src = rng.normal(size=(6, 3))
            dst = rng.normal(size=(6, 3))
            s_est, _, _ = solve_sim_transform(src, dst)
            p_t = src - src.mean(axis=0)
            q_t = dst - dst.mean(axis=0)
            expected = weighted_scale(
                np.linalg.norm(p_t, axis=1), np.linalg.norm(q_t, axis=1)
            )
            assert s_est == pytest.approx(expected, rel=1e-12)


class TestRotationHelpers:
    def test_quaternion_identity(self):
        assert np.allclose(quaternion_to_matrix(np.array([1.0, 0, 0, 0])), np.eye(3))

    def test_quaternion_orthonormal(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            r = quaternion_to_matrix(q)
            assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    def test_quaternion_matches_scipy(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            ours = quaternion_to_matrix(q)
            # scipy uses (x, y, z, w) ordering
            theirs = ScipyRotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()
            assert np.allclose(ours, theirs, atol=1e-12)

    def test_random_rotation_proper(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            r = random_rotation(rng)
            assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    def test_random_rotation_deterministic(self):
        a = random_rotation(np.random.default_rng(42))
        b = random_rotation(np.random.default_rng(42))
        assert np.array_equal(a, b)
