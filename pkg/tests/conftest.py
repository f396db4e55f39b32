import numpy as np
import pytest

from partswap.model_core import generate_synthetic_model_with_reference
from partswap.render import (
    TextureParams,
    camera_for_pose,
    fit_pose_to_frame,
    render_face,
    rotation_ypr,
)

MODEL_M, MODEL_K, MODEL_SEED = 1800, 8, 7


@pytest.fixture(scope="session")
def model_and_reference():
    return generate_synthetic_model_with_reference(MODEL_M, MODEL_K, MODEL_SEED)


@pytest.fixture(scope="session")
def model(model_and_reference):
    return model_and_reference[0]


@pytest.fixture(scope="session")
def reference(model_and_reference):
    return model_and_reference[1]


def render_view(model, alpha, yaw_deg, pitch_deg=0.0, roll_deg=0.0, size=(192, 192),
                texture=TextureParams(), fill=0.66):
    """Render one synthetic view; returns (image, landmarks, coverage, camera)."""
    rotation = rotation_ypr(np.deg2rad(yaw_deg), np.deg2rad(pitch_deg), np.deg2rad(roll_deg))
    scale, translation = fit_pose_to_frame(model, rotation, size, fill=fill)
    camera = camera_for_pose(rotation, scale, translation)
    image, landmarks, coverage = render_face(model, alpha, camera, size, texture)
    return image, landmarks, coverage, camera


@pytest.fixture(scope="session")
def two_views(model):
    """Two renders of one deformed face under different cameras."""
    rng = np.random.default_rng(11)
    alpha = rng.normal(size=model.k) * 0.5 * model.reg_weights
    view_a = render_view(model, alpha, yaw_deg=8.0, pitch_deg=3.0)
    view_b = render_view(model, alpha, yaw_deg=-6.0, pitch_deg=-2.0)
    return view_a, view_b
