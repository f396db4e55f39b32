import numpy as np
import pytest

from partswap.camera_fit import (
    AffineCamera,
    estimate_camera,
    extract_rotation,
    project,
)
from partswap.errors import DegenerateCameraError, DegenerateGeometryError


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_instance(rng, n=68):
    L = rng.normal(size=(n, 3)) * rng.uniform(0.5, 3.0)
    A = rng.normal(size=(2, 3)) * rng.uniform(10.0, 120.0)
    t = rng.normal(size=2) * 100.0
    return L, A, t, L @ A.T + t


class TestEstimateCamera:
    def test_scale_translation_tetrahedron(self):
        L = np.array(
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        )
        l = 2.0 * L[:, :2] + np.array([5.0, 5.0])
        cam = estimate_camera(l, L)
        np.testing.assert_allclose(cam.A, [[2, 0, 0], [0, 2, 0]], atol=1e-12)
        np.testing.assert_allclose(cam.t, [5, 5], atol=1e-12)

    def test_synthesize_then_recover(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            L, A, t, l = random_instance(rng)
            cam = estimate_camera(l, L)
            assert np.abs(cam.A - A).max() <= 1e-8
            assert np.abs(cam.t - t).max() <= 1e-8

    def test_noisy_residual_at_least_squares_optimum(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            L, A, t, l = random_instance(rng)
            noisy = l + rng.normal(size=l.shape) * 2.0
            cam = estimate_camera(noisy, L)
            res_fit = np.linalg.norm(noisy - project(cam, L))
            res_truth = np.linalg.norm(noisy - (L @ A.T + t))
            assert res_fit <= res_truth + 1e-9
            # normal-equations oracle on the homogeneous design [L 1]
            design = np.column_stack([L, np.ones(len(L))])
            coef, *_ = np.linalg.lstsq(design, noisy, rcond=None)
            res_oracle = np.linalg.norm(noisy - design @ coef)
            assert abs(res_fit - res_oracle) <= 1e-8 * max(res_oracle, 1.0)

    def test_coplanar_points_rejected(self):
        rng = np.random.default_rng(2)
        L = rng.normal(size=(68, 3))
        L[:, 2] = 4.2  # flat z = const landmark set
        l = L[:, :2]
        with pytest.raises(DegenerateGeometryError):
            estimate_camera(l, L)

    def test_too_few_points(self):
        with pytest.raises(DegenerateGeometryError):
            estimate_camera(np.zeros((3, 2)), np.eye(3))

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        L, A, t, l = random_instance(rng)
        noisy = l + rng.normal(size=l.shape)
        d = np.array([17.5, -3.25])
        cam0 = estimate_camera(noisy, L)
        cam1 = estimate_camera(noisy + d, L)
        assert np.abs(cam1.A - cam0.A).max() <= 1e-10 * max(np.abs(cam0.A).max(), 1.0)
        assert np.abs(cam1.t - (cam0.t + d)).max() <= 1e-10 * max(np.abs(cam0.t).max(), 1.0)

    def test_3d_translation_equivariance(self):
        rng = np.random.default_rng(4)
        L, A, t, l = random_instance(rng)
        noisy = l + rng.normal(size=l.shape)
        shift = np.array([1.5, -2.0, 3.0])
        cam0 = estimate_camera(noisy, L)
        cam1 = estimate_camera(noisy, L + shift)
        assert np.abs(cam1.A - cam0.A).max() <= 1e-9 * np.abs(cam0.A).max()
        np.testing.assert_allclose(cam1.t, cam0.t - cam0.A @ shift, atol=1e-8)


class TestProject:
    def test_axis_projection(self):
        cam = AffineCamera([[1, 0, 0], [0, 1, 0]], [0, 0])
        pts = np.random.default_rng(0).normal(size=(10, 3))
        np.testing.assert_array_equal(project(cam, pts), pts[:, :2])

    def test_origin_maps_to_translation(self):
        cam = AffineCamera([[3, 1, -2], [0, 4, 1]], [7.0, -2.5])
        np.testing.assert_array_equal(project(cam, np.zeros((1, 3)))[0], cam.t)

    def test_round_trip_with_estimate(self):
        rng = np.random.default_rng(5)
        L, A, t, l = random_instance(rng)
        cam = estimate_camera(l, L)
        assert np.abs(project(cam, L) - l).max() <= 1e-8

    def test_exactly_affine(self):
        rng = np.random.default_rng(6)
        cam = AffineCamera(rng.normal(size=(2, 3)), rng.normal(size=2))
        p = rng.normal(size=(5, 3))
        q = rng.normal(size=(5, 3))
        lhs = project(cam, p + q) - project(cam, q)
        np.testing.assert_allclose(lhs, p @ cam.A.T, atol=1e-12)


class TestExtractRotation:
    def test_frontal_pose(self):
        for s in (0.5, 1.0, 37.5):
            rot, scale = extract_rotation(AffineCamera(s * np.eye(3)[:2], [0, 0]))
            np.testing.assert_allclose(rot.R, np.eye(3), atol=1e-12)
            assert abs(scale - s) <= 1e-12 * s

    def test_planar_rotation(self):
        rot, scale = extract_rotation(AffineCamera([[0, -1, 0], [1, 0, 0]], [0, 0]))
        expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
        np.testing.assert_allclose(rot.R, expected, atol=1e-12)
        assert abs(scale - 1.0) <= 1e-12

    def test_synthesize_then_recover(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            R0 = random_rotation(rng)
            s = rng.uniform(0.1, 100.0)
            rot, scale = extract_rotation(AffineCamera(s * R0[:2], rng.normal(size=2)))
            assert np.linalg.norm(rot.R - R0) <= 1e-8
            assert abs(scale - s) <= 1e-8 * s

    def test_composition(self, model):
        rng = np.random.default_rng(8)
        R0 = random_rotation(rng)
        R1 = random_rotation(rng)
        s = 20.0
        rot_a, _ = extract_rotation(AffineCamera(s * R0[:2], [0, 0]))
        # applying R1 to the model first composes the extracted rotation
        rot_b, _ = extract_rotation(AffineCamera(s * (R0 @ R1)[:2], [0, 0]))
        np.testing.assert_allclose(rot_b.R, rot_a.R @ R1, atol=1e-9)

    def test_zero_row_rejected(self):
        with pytest.raises(DegenerateCameraError):
            extract_rotation(AffineCamera([[0, 0, 0], [1, 0, 0]], [0, 0]))

    def test_parallel_rows_rejected(self):
        with pytest.raises(DegenerateCameraError):
            extract_rotation(AffineCamera([[1, 2, 3], [2, 4, 6]], [0, 0]))

    def test_always_orthonormal_and_proper(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            A = rng.normal(size=(2, 3))
            if np.linalg.svd(A, compute_uv=False)[1] < 1e-6:
                continue
            rot, _ = extract_rotation(AffineCamera(A, [0, 0]))
            assert np.abs(rot.R @ rot.R.T - np.eye(3)).max() <= 1e-9
            assert abs(np.linalg.det(rot.R) - 1.0) <= 1e-9
