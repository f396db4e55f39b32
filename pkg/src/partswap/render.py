"""Synthetic face rendering: z-buffered Gouraud rasterization of a fitted mesh.

Produces desk-scale test imagery with exact landmark ground truth. Textures
are view-independent per-vertex albedo functions of the mean-shape
coordinates, so two renders of the same face under different cameras show the
same skin pattern and can oracle patch transfers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera_fit import AffineCamera, project
from .model_core import MorphableModel, deform_shape
from .patch_warp import covered_pixels


def rotation_ypr(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation matrix from yaw (about y), pitch (about x), roll (about z), radians."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cx, sx = np.cos(pitch), np.sin(pitch)
    cz, sz = np.cos(roll), np.sin(roll)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return rz @ rx @ ry


def yaw_pitch_roll(R: np.ndarray) -> tuple:
    """Invert rotation_ypr: angles (radians) such that R = Rz(roll)Rx(pitch)Ry(yaw)."""
    R = np.asarray(R, dtype=np.float64)
    pitch = np.arcsin(np.clip(R[2, 1], -1.0, 1.0))
    yaw = np.arctan2(-R[2, 0], R[2, 2])
    roll = np.arctan2(-R[0, 1], R[1, 1])
    return float(yaw), float(pitch), float(roll)


def camera_for_pose(rotation: np.ndarray, scale: float, translation: np.ndarray) -> AffineCamera:
    """Orthographic camera realizing a rigid pose: A = scale * R[:2], t = translation."""
    return AffineCamera(scale * rotation[:2], translation)


@dataclass(frozen=True)
class TextureParams:
    """Procedural smooth albedo: base tone plus low-frequency modulation."""

    base_rgb: tuple = (185.0, 150.0, 125.0)
    amplitude: float = 35.0
    freq_x: float = 2.1
    freq_y: float = 1.4
    phase: float = 0.0

    def colors(self, mean_vertices: np.ndarray) -> np.ndarray:
        x, y = mean_vertices[:, 0], mean_vertices[:, 1]
        wave = np.sin(self.freq_x * x + self.phase) * np.cos(self.freq_y * y - self.phase)
        ripple = 0.5 * np.sin(3.0 * (x + y) + 2.0 * self.phase)
        base = np.asarray(self.base_rgb, dtype=np.float64)
        shade = self.amplitude * (wave + ripple)[:, None] * np.array([1.0, 0.9, 0.8])
        return np.clip(base[None, :] + shade, 0.0, 255.0)


def render_face(
    model: MorphableModel,
    alpha: np.ndarray,
    camera: AffineCamera,
    size: tuple,
    texture: TextureParams = TextureParams(),
    background: tuple = (24, 24, 28),
):
    """Rasterize the deformed model under an orthographic camera.

    Returns (image, landmarks, coverage): (H, W, 3) uint8, (68, 2) float64
    projected landmark positions, and the boolean pixel coverage map.
    """
    height, width = size
    shape = deform_shape(model, alpha)
    projected = project(camera, shape.vertices)
    rotation = camera.A  # depth from the camera plane normal
    normal = np.cross(rotation[0], rotation[1])
    norm = np.linalg.norm(normal)
    if norm == 0:
        raise ValueError("camera rows are parallel; no depth axis")
    depth = shape.vertices @ (normal / norm)

    colors = texture.colors(model.mean_shape)
    image = np.empty((height, width, 3), dtype=np.float64)
    image[:, :] = np.asarray(background, dtype=np.float64)
    zbuf = np.full((height, width), -np.inf)
    covered = np.zeros((height, width), dtype=bool)

    for tri in model.triangulation:
        p = projected[tri]
        rows, cols = covered_pixels(p, height, width)
        if rows.size == 0:
            continue
        denom = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (
            p[2, 0] - p[0, 0]
        )
        px = cols.astype(np.float64)
        py = rows.astype(np.float64)
        w1 = ((px - p[0, 0]) * (p[2, 1] - p[0, 1]) - (py - p[0, 1]) * (p[2, 0] - p[0, 0])) / denom
        w2 = ((p[1, 0] - p[0, 0]) * (py - p[0, 1]) - (p[1, 1] - p[0, 1]) * (px - p[0, 0])) / denom
        w0 = 1.0 - w1 - w2
        z = w0 * depth[tri[0]] + w1 * depth[tri[1]] + w2 * depth[tri[2]]
        closer = z > zbuf[rows, cols]
        if not closer.any():
            continue
        rows, cols = rows[closer], cols[closer]
        w0, w1, w2, z = w0[closer], w1[closer], w2[closer], z[closer]
        zbuf[rows, cols] = z
        image[rows, cols] = (
            w0[:, None] * colors[tri[0]]
            + w1[:, None] * colors[tri[1]]
            + w2[:, None] * colors[tri[2]]
        )
        covered[rows, cols] = True

    landmarks = projected[model.landmark_indices]
    return np.clip(image + 0.5, 0, 255).astype(np.uint8), landmarks, covered


def fit_pose_to_frame(model: MorphableModel, rotation: np.ndarray, size: tuple, fill: float = 0.72):
    """Scale and translation placing the rotated model centered in a frame."""
    height, width = size
    rotated = model.mean_shape @ rotation.T
    xy = rotated[:, :2]
    span = (xy.max(axis=0) - xy.min(axis=0)).max()
    scale = fill * min(height, width) / span
    center = 0.5 * (xy.max(axis=0) + xy.min(axis=0))
    translation = np.array([width / 2.0, height / 2.0]) - scale * center
    return scale, translation
