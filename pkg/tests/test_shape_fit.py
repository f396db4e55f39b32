import numpy as np
import pytest

from oracles import dense_ridge
from partswap.camera_fit import AffineCamera, estimate_camera, project
from partswap.errors import SingularSystemError
from partswap.model_core import MorphableModel, deform_shape, extract_landmarks3d
from partswap.shape_fit import FitParams, fit_image, solve_coefficients


def design_matrix_oracle(model, camera):
    """Test-side reconstruction of the design matrix, plain loops."""
    cols = []
    for i in range(model.k):
        rows = model.dictionary[i][model.landmark_indices]  # (68, 3)
        cols.append((rows @ camera.A.T).reshape(-1))
    return np.column_stack(cols)


def mean_landmarks(model):
    return model.mean_shape[model.landmark_indices]


@pytest.fixture(scope="module")
def camera(model):
    return estimate_camera(
        mean_landmarks(model)[:, :2] * 80.0 + 100.0, mean_landmarks(model)
    )


class TestSolveCoefficients:
    def test_zero_residual_gives_zero_alpha(self, model, camera):
        l = project(camera, mean_landmarks(model))
        for lam in (0.0, 0.05, 1e6):
            alpha = solve_coefficients(l, model, camera, lam)
            assert np.abs(alpha).max() <= 1e-9

    def test_huge_lambda_shrinks_to_zero(self, model, camera):
        rng = np.random.default_rng(0)
        l = project(camera, mean_landmarks(model)) + rng.normal(size=(68, 2)) * 5.0
        X = design_matrix_oracle(model, camera)
        lam = 1e12 * np.linalg.svd(X, compute_uv=False)[0] ** 2
        alpha = solve_coefficients(l, model, camera, lam)
        assert np.linalg.norm(alpha) <= 1e-6

    def test_synthesize_then_recover(self, model, camera):
        rng = np.random.default_rng(1)
        for _ in range(5):
            alpha0 = rng.normal(size=model.k) * 0.5
            lm = mean_landmarks(model) + np.tensordot(
                alpha0, model.dictionary[:, model.landmark_indices, :], axes=1
            )
            l = project(camera, lm)
            alpha = solve_coefficients(l, model, camera, 0.0, stabilize=False)
            assert np.abs(alpha - alpha0).max() <= 1e-6

    def test_matches_dense_oracle(self, model, camera):
        rng = np.random.default_rng(2)
        l = project(camera, mean_landmarks(model)) + rng.normal(size=(68, 2)) * 3.0
        X = design_matrix_oracle(model, camera)
        r = (l - project(camera, mean_landmarks(model))).reshape(-1)
        for lam in (1e-3, 1.0, 50.0):
            alpha = solve_coefficients(l, model, camera, lam)
            expected = dense_ridge(X, r, lam, model.reg_weights)
            assert np.abs(alpha - expected).max() <= 1e-6

    def test_normal_equations_residual(self, model, camera):
        rng = np.random.default_rng(3)
        l = project(camera, mean_landmarks(model)) + rng.normal(size=(68, 2)) * 3.0
        X = design_matrix_oracle(model, camera)
        r = (l - project(camera, mean_landmarks(model))).reshape(-1)
        for lam in (0.0, 0.1, 10.0):
            alpha = solve_coefficients(l, model, camera, lam, stabilize=False)
            N = X.T @ X + (lam * np.diag(model.reg_weights**-2.0) if lam else 0.0)
            lhs = np.linalg.norm(N @ alpha - X.T @ r)
            assert lhs <= 1e-8 * np.linalg.norm(X.T @ r)

    def test_ridge_shrinkage_monotone(self, model, camera):
        rng = np.random.default_rng(4)
        l = project(camera, mean_landmarks(model)) + rng.normal(size=(68, 2)) * 3.0
        lams = [0.0, 1e-3, 1e-1, 10.0, 1e3]
        norms = [np.linalg.norm(solve_coefficients(l, model, camera, lam)) for lam in lams]
        for smaller, larger in zip(norms[1:], norms[:-1]):
            assert smaller <= larger + 1e-12

    def test_singular_system_error(self):
        rng = np.random.default_rng(5)
        mean = rng.normal(size=(100, 3))
        comp = rng.normal(size=(100, 3)) * 0.1
        dictionary = np.stack([comp, comp])  # duplicate components: rank deficient
        model = MorphableModel(
            mean,
            dictionary,
            np.array([1.0, 1.0]),
            np.arange(68),
            {"eyes": [0], "nose": [1], "mouth": [2], "full": np.arange(100)},
            np.array([[0, 1, 2]]),
        )
        camera = AffineCamera([[50.0, 0, 0], [0, 50.0, 0]], [0, 0])
        l = project(camera, mean[:68]) + 1.0
        with pytest.raises(SingularSystemError):
            solve_coefficients(l, model, camera, 0.0, stabilize=False)
        # the documented jitter makes the default path solvable
        solve_coefficients(l, model, camera, 0.0, stabilize=True)


class TestFitImage:
    def test_self_fit_of_mean(self, model):
        rng = np.random.default_rng(6)
        A = rng.normal(size=(2, 3)) * 60.0
        camera = AffineCamera(A, [120.0, 96.0])
        l = project(camera, mean_landmarks(model))
        fit = fit_image(l, model, FitParams(lam=0.05, n_iterations=2))
        assert np.abs(fit.alpha).max() <= 1e-8
        assert fit.landmark_residual <= 1e-6
        assert np.abs(project(fit.camera, mean_landmarks(model)) - l).max() <= 1e-6

    def test_synthesize_then_recover(self, model):
        rng = np.random.default_rng(7)
        for trial in range(3):
            alpha0 = rng.normal(size=model.k) * 0.25 * model.reg_weights
            shape = deform_shape(model, alpha0)
            camera = estimate_camera(
                extract_landmarks3d(model, shape)[:, :2] * 70.0 + 90.0,
                extract_landmarks3d(model, shape),
            )
            l = project(camera, extract_landmarks3d(model, shape))
            fit = fit_image(l, model, FitParams(lam=1e-6, n_iterations=3))
            assert fit.landmark_residual <= 0.1

    def test_objective_non_increasing(self, model):
        rng = np.random.default_rng(8)
        alpha0 = rng.normal(size=model.k) * 0.6 * model.reg_weights
        shape = deform_shape(model, alpha0)
        lm3 = extract_landmarks3d(model, shape)
        camera = estimate_camera(lm3[:, :2] * 70.0 + 90.0, lm3)
        l = project(camera, lm3) + rng.normal(size=(68, 2)) * 0.5
        fit = fit_image(l, model, FitParams(lam=0.05, n_iterations=6))
        objs = np.array(fit.round_objectives)
        assert np.all(np.diff(objs) <= 1e-9 * objs[0])

    def test_more_rounds_no_worse(self, model):
        rng = np.random.default_rng(9)
        for trial in range(3):
            alpha0 = rng.normal(size=model.k) * 0.4 * model.reg_weights
            shape = deform_shape(model, alpha0)
            lm3 = extract_landmarks3d(model, shape)
            camera = estimate_camera(lm3[:, :2] * 70.0 + 90.0, lm3)
            l = project(camera, lm3)
            l = l + rng.normal(size=(68, 2)) * 0.8  # noisy: residual well above the floor
            r1 = fit_image(l, model, FitParams(lam=1e-6, n_iterations=1)).landmark_residual
            fit2 = fit_image(l, model, FitParams(lam=1e-6, n_iterations=2))
            assert fit2.landmark_residual <= r1 + 1e-9
            assert fit2.round_objectives[1] <= fit2.round_objectives[0] + 1e-12

    def test_deterministic(self, model, two_views):
        (_, lm, _, _), _ = two_views
        a = fit_image(lm, model, FitParams())
        b = fit_image(lm, model, FitParams())
        np.testing.assert_array_equal(a.alpha, b.alpha)
        np.testing.assert_array_equal(a.shape.vertices, b.shape.vertices)
        np.testing.assert_array_equal(a.camera.A, b.camera.A)
        np.testing.assert_array_equal(a.camera.t, b.camera.t)
        np.testing.assert_array_equal(a.projected, b.projected)
        np.testing.assert_array_equal(a.rotation.R, b.rotation.R)
        assert a.landmark_residual == b.landmark_residual

    def test_translation_equivariance(self, model, two_views):
        (_, lm, _, _), _ = two_views
        d = np.array([12.5, -7.0])
        a = fit_image(lm, model, FitParams())
        b = fit_image(lm + d, model, FitParams())
        assert np.abs(b.alpha - a.alpha).max() <= 1e-9
        assert np.abs(b.shape.vertices - a.shape.vertices).max() <= 1e-9
        assert np.abs(b.camera.t - (a.camera.t + d)).max() <= 1e-9 * max(
            1.0, np.abs(a.camera.t).max()
        )
        assert np.abs(b.projected - (a.projected + d)).max() <= 1e-9 * max(
            1.0, np.abs(a.projected).max()
        )

    def test_projected_matches_camera(self, model, two_views):
        (_, lm, _, _), _ = two_views
        fit = fit_image(lm, model, FitParams())
        np.testing.assert_array_equal(fit.projected, project(fit.camera, fit.shape.vertices))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            FitParams(lam=-1.0)
        with pytest.raises(ValueError):
            FitParams(n_iterations=0)
