import numpy as np
import pytest

from ransic.consensus import Vertex, extract_inliers
from ransic.exceptions import InvalidParam, ZeroVector
from ransic.geometry import geodesic_distance, random_rotation
from ransic.rotation_search import (
    RansicRotationSearch,
    length_compat,
    rotation_edge,
)
from ransic.synthetic import gen_rotation_problem


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def vert(rotation, idx=(0, 1)):
    return Vertex(indices=tuple(idx), estimate=rotation, cache={})


class TestLengthCompat:
    def test_true_pair_noiseless(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            r = random_rotation(rng)
            a1, a2 = rng.normal(size=3), rng.normal(size=3)
            assert length_compat(a1, r @ a1, a2, r @ a2, zeta=1e-9)

    def test_scaled_inputs_ok(self):
        # the invariant is built from normalized vectors, so per-row
        # scaling on either side must not matter
        rng = np.random.default_rng(1)
        r = random_rotation(rng)
        a1, a2 = rng.normal(size=3), rng.normal(size=3)
        assert length_compat(3.0 * a1, 0.25 * (r @ a1), 0.5 * a2, 7.0 * (r @ a2),
                             zeta=1e-9)

    def test_rejects_wild_mismatch(self):
        a1 = np.array([1.0, 0, 0])
        a2 = np.array([0, 1.0, 0])
        b1 = np.array([1.0, 0, 0])
        b2 = np.array([np.sqrt(0.5), 0, np.sqrt(0.5)])  # 45 deg off any rigid image
        assert not length_compat(a1, b1, a2, b2, zeta=0.008)

    def test_boundary_inclusive(self):
        # exact-arithmetic construction: unit axis vectors keep every norm
        # and division exact, so the slack X* is exactly 0 and the gap
        # f = 2 - sqrt(2) is exact by Sterbenz subtraction. zeta == f must
        # pass (<=), one ulp below must fail.
        a1, a2 = np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])
        b1, b2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
        f = abs(float(np.linalg.norm(b1 - b2)) - 2.0)
        assert length_compat(a1, b1, a2, b2, zeta=f)
        assert not length_compat(a1, b1, a2, b2, zeta=np.nextafter(f, 0.0))

    def test_zero_vector_raises(self):
        good = np.array([1.0, 0, 0])
        zero = np.zeros(3)
        tiny = np.full(3, 1e-13)
        for bad_pos in range(4):
            args = [good.copy() for _ in range(4)]
            args[bad_pos] = zero
            with pytest.raises(ZeroVector):
                length_compat(*args, zeta=0.01)
        args = [good.copy() for _ in range(4)]
        args[2] = tiny
        with pytest.raises(ZeroVector):
            length_compat(*args, zeta=0.01)

    def test_zeta_validation(self):
        a = np.array([1.0, 0, 0])
        b = np.array([0, 1.0, 0])
        assert length_compat(a, a, b, b, zeta=0.0)  # zero slack is legal
        with pytest.raises(InvalidParam):
            length_compat(a, a, b, b, zeta=-0.01)


class TestRotationEdge:
    def test_identical_rotations(self):
        rng = np.random.default_rng(2)
        r = random_rotation(rng)
        assert rotation_edge(vert(r), vert(r, (2, 3)), theta=1e-6)

    def test_far_rotations_fail(self):
        assert not rotation_edge(vert(np.eye(3)), vert(rot_x(0.5)),
                                 theta=np.radians(5))

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v1 = vert(random_rotation(rng))
            v2 = vert(random_rotation(rng), (2, 3))
            th = rng.uniform(0.01, 0.5)
            assert rotation_edge(v1, v2, th) == rotation_edge(v2, v1, th)

    def test_boundary_inclusive(self):
        # the test runs in the cosine domain. walk the threshold in ulps
        # until cos(theta) equals the achieved cosine bit-exactly: that
        # threshold must pass, and the largest threshold whose cosine
        # exceeds it must fail.
        r2 = rot_x(0.087)
        c_ach = (np.trace(r2) - 1.0) / 2.0
        theta = float(np.arccos(c_ach))
        for _ in range(1000):
            if np.cos(theta) == c_ach:
                break
            theta = np.nextafter(theta, 0.0 if np.cos(theta) < c_ach else np.pi)
        assert np.cos(theta) == c_ach, "no exact-cosine threshold found"
        assert rotation_edge(vert(np.eye(3)), vert(r2), theta)
        below = np.nextafter(theta, 0.0)
        while np.cos(below) == c_ach:
            below = np.nextafter(below, 0.0)
        assert not rotation_edge(vert(np.eye(3)), vert(r2), below)


class TestRansicRotationSearch:
    def test_noiseless_exact(self):
        p = gen_rotation_problem(50, 0.0, 0.0, seed=0)
        est = RansicRotationSearch(sigma=1e-9, random_state=0).fit(p.src, p.dst)
        assert est.terminated_
        assert geodesic_distance(est.rotation_, p.rotation) < 1e-6
        assert est.inlier_indices_.tolist() == list(range(50))

    def test_noiseless_second_vertex_terminates(self):
        # with k_init=1 the second accepted sample already has degree 1,
        # so an all-inlier problem stops after exactly two vertices
        p = gen_rotation_problem(100, 0.0, 0.0, seed=1)
        est = RansicRotationSearch(sigma=1e-9, random_state=1).fit(p.src, p.dst)
        assert est.vertices_created_ == 2

    def test_high_outlier_recovery(self):
        p = gen_rotation_problem(1000, 0.9, 0.01, seed=2)
        est = RansicRotationSearch(random_state=2).fit(p.src, p.dst)
        assert est.terminated_
        assert np.degrees(geodesic_distance(est.rotation_, p.rotation)) < 1.0

    def test_inlier_set_matches_residual_gate(self):
        p = gen_rotation_problem(500, 0.8, 0.01, seed=3)
        est = RansicRotationSearch(random_state=3).fit(p.src, p.dst)
        expected = extract_inliers(est.residuals_, est.sigma)
        assert np.array_equal(est.inlier_indices_, expected)
        assert np.array_equal(np.flatnonzero(est.inlier_mask_), est.inlier_indices_)

    def test_residuals_under_returned_estimate(self):
        # residuals_ must be recomputed under rotation_, not under the
        # pre-refinement vertex estimate
        p = gen_rotation_problem(400, 0.5, 0.01, seed=4)
        est = RansicRotationSearch(random_state=4).fit(p.src, p.dst)
        a = p.src / np.linalg.norm(p.src, axis=1, keepdims=True)
        b = p.dst / np.linalg.norm(p.dst, axis=1, keepdims=True)
        recomputed = np.linalg.norm(b - a @ est.rotation_.T, axis=1)
        assert np.allclose(est.residuals_, recomputed, atol=1e-12)

    def test_scaled_inputs_recovered(self):
        rng = np.random.default_rng(5)
        p = gen_rotation_problem(80, 0.0, 0.0, seed=5)
        src = p.src * rng.uniform(0.2, 9.0, size=(80, 1))
        dst = p.dst * rng.uniform(0.2, 9.0, size=(80, 1))
        est = RansicRotationSearch(sigma=1e-9, random_state=5).fit(src, dst)
        assert geodesic_distance(est.rotation_, p.rotation) < 1e-6

    def test_budget_exhaustion_flagged(self):
        # nothing but outliers: the sampler must give up cleanly
        p = gen_rotation_problem(40, 0.975, 0.01, seed=6)
        assert p.inlier_mask.sum() == 1  # a single inlier cannot terminate
        est = RansicRotationSearch(max_samples=3000, random_state=6).fit(p.src, p.dst)
        assert not est.terminated_
        assert est.samples_drawn_ <= 3000
        assert np.allclose(est.rotation_ @ est.rotation_.T, np.eye(3), atol=1e-9)

    def test_determinism(self):
        p = gen_rotation_problem(600, 0.9, 0.01, seed=7)
        a = RansicRotationSearch(random_state=11).fit(p.src, p.dst)
        b = RansicRotationSearch(random_state=11).fit(p.src, p.dst)
        assert np.array_equal(a.rotation_, b.rotation_)
        assert a.samples_drawn_ == b.samples_drawn_
        assert a.vertices_created_ == b.vertices_created_
        assert np.array_equal(a.inlier_indices_, b.inlier_indices_)

    def test_fit_returns_self(self):
        p = gen_rotation_problem(50, 0.0, 0.01, seed=8)
        est = RansicRotationSearch(random_state=0)
        assert est.fit(p.src, p.dst) is est

    def test_transform_applies_rotation(self):
        p = gen_rotation_problem(50, 0.0, 0.0, seed=9)
        est = RansicRotationSearch(sigma=1e-9, random_state=0).fit(p.src, p.dst)
        X = np.random.default_rng(0).normal(size=(7, 3))
        assert np.allclose(est.transform(X), X @ est.rotation_.T)
        assert np.array_equal(est.predict(X), est.transform(X))

    def test_max_samples_respected(self):
        p = gen_rotation_problem(100, 0.95, 0.01, seed=10)
        est = RansicRotationSearch(max_samples=500, random_state=1).fit(p.src, p.dst)
        assert est.samples_drawn_ <= 500

    @pytest.mark.parametrize("bad", [
        dict(zeta=-1.0),
        dict(theta=0.0), dict(theta=np.pi),
        dict(upsilon=0.0), dict(tau=0),
        dict(sigma=0.0), dict(k_init=0), dict(max_samples=0),
    ])
    def test_param_validation(self, bad):
        p = gen_rotation_problem(30, 0.0, 0.01, seed=11)
        with pytest.raises(InvalidParam):
            RansicRotationSearch(**bad).fit(p.src, p.dst)

    def test_input_validation(self):
        est = RansicRotationSearch()
        with pytest.raises((ValueError, InvalidParam)):
            est.fit(np.ones((5, 3)), np.ones((4, 3)))
        with pytest.raises((ValueError, InvalidParam)):
            est.fit(np.ones((5, 2)), np.ones((5, 2)))
        bad = np.ones((5, 3))
        bad[2, 1] = np.nan
        with pytest.raises(ValueError):
            est.fit(bad, np.ones((5, 3)))

    def test_zero_row_raises(self):
        src = np.ones((5, 3))
        dst = np.ones((5, 3))
        src[3] = 0.0
        with pytest.raises(ZeroVector):
            RansicRotationSearch().fit(src, dst)

    def test_too_few_rows(self):
        with pytest.raises((ValueError, InvalidParam)):
            RansicRotationSearch().fit(np.ones((1, 3)), np.ones((1, 3)))
