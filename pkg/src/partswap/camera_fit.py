"""Orthographic camera estimation, projection, and rotation extraction.

The camera maps a 3D point p to the image as A @ p + t, with A a 2x3 matrix
and t a 2-vector in pixels. A is solved on centroid-centered correspondences
via the pseudo-inverse, which makes the (A, t) pair the joint least-squares
optimum; t then falls out of the centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCameraError, DegenerateGeometryError

# Relative singular-value cutoffs for rank decisions.
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class AffineCamera:
    A: np.ndarray  # (2, 3), pixels per model unit
    t: np.ndarray  # (2,), pixels

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64).reshape(2, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(2)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(t))):
            raise ValueError("camera parameters must be finite")
        A.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class Rotation3D:
    R: np.ndarray  # (3, 3), orthonormal, det +1

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
            raise ValueError("R is not orthonormal to 1e-9")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("det(R) != +1 to 1e-9")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)


def estimate_camera(l: np.ndarray, L: np.ndarray) -> AffineCamera:
    """Fit the affine camera minimizing ||l - (A @ L + t)|| over all (A, t).

    l: (n, 2) image points in pixels; L: (n, 3) model points. Both sets are
    centered on their centroids before the pseudo-inverse solve.
    """
    l = np.asarray(l, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if l.ndim != 2 or l.shape[1] != 2 or L.shape != (l.shape[0], 3):
        raise ValueError(f"expected (n, 2) and (n, 3) point arrays, got {l.shape}, {L.shape}")
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(L))):
        raise ValueError("points must be finite")
    if l.shape[0] < 4:
        raise DegenerateGeometryError("need at least 4 correspondences")

    cl = l.mean(axis=0)
    cL = L.mean(axis=0)
    lc = l - cl
    Lc = L - cL
    sv = np.linalg.svd(Lc, compute_uv=False)
    if sv[2] <= _RANK_RTOL * sv[0]:
        raise DegenerateGeometryError(
            "3D points are coplanar or collinear (centered rank < 3)"
        )
    # A @ Lc_i ~= lc_i  <=>  Lc @ A.T ~= lc
    A = np.linalg.pinv(Lc) @ lc
    A = A.T
    t = cl - A @ cL
    return AffineCamera(A, t)


def project(camera: AffineCamera, points: np.ndarray) -> np.ndarray:
    """Apply the camera to (n, 3) points; returns (n, 2) pixel coordinates."""
    points = np.asarray(points, dtype=np.float64)
    return points @ camera.A.T + camera.t


def extract_rotation(camera: AffineCamera) -> tuple[Rotation3D, float]:
    """Recover the 3D head rotation and isotropic scale from the camera.

    The two rows of A are divided by their mean norm, replaced by the closest
    orthonormal pair (polar factor of the thin SVD, so no row-order
    dependence), and completed with their cross product, which fixes
    det(R) = +1.
    """
    A = camera.A
    norms = np.linalg.norm(A, axis=1)
    if norms.min() <= 0.0:
        raise DegenerateCameraError("camera has a zero row")
    scale = float(norms.mean())
    B = A / scale
    U, sv, Vt = np.linalg.svd(B, full_matrices=False)
    if sv[1] <= _RANK_RTOL * sv[0]:
        raise DegenerateCameraError("camera rows are parallel")
    rows = U @ Vt
    r3 = np.cross(rows[0], rows[1])
    R = np.vstack([rows, r3])
    return Rotation3D(R), scale
