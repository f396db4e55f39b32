"""Valid triangle-pair selection: part lookup, visibility, occlusion masks.

Self-occlusion is handled by spherical-flip hidden-point removal on the
rotation-aligned shape; external occlusion by zero pixels in the face
segmentation masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHullError, UnknownPartError
from .model_core import MorphableModel
from .shape_fit import FitResult

# Defaults fixed by the pipeline contract.
HPR_GAMMA = 10.0
VIEW_DISTANCE_FACTOR = 10.0
MIN_TRIANGLE_AREA = 0.25  # px^2; smaller projected triangles are un-rasterizable slivers


@dataclass(frozen=True)
class VisibilityResult:
    visible: np.ndarray  # (n,) bool

    def __post_init__(self):
        v = np.asarray(self.visible, dtype=bool)
        v.setflags(write=False)
        object.__setattr__(self, "visible", v)


@dataclass(frozen=True)
class TrianglePair:
    """A corresponding source/target triangle in pixel coordinates."""

    triangle_id: int
    src_px: np.ndarray  # (3, 2)
    dst_px: np.ndarray  # (3, 2)

    def __post_init__(self):
        src = np.asarray(self.src_px, dtype=np.float64).reshape(3, 2)
        dst = np.asarray(self.dst_px, dtype=np.float64).reshape(3, 2)
        if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
            raise ValueError("triangle coordinates must be finite")
        src.setflags(write=False)
        dst.setflags(write=False)
        object.__setattr__(self, "src_px", src)
        object.__setattr__(self, "dst_px", dst)


def triangle_area(px: np.ndarray) -> float:
    """Unsigned area of a 2D triangle given as (3, 2)."""
    e1 = px[1] - px[0]
    e2 = px[2] - px[0]
    return 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])


def part_triangles(model: MorphableModel, part: str) -> np.ndarray:
    """Ids of triangles whose three vertices all belong to the named region."""
    if part not in model.part_regions:
        raise UnknownPartError(f"unknown part {part!r}; expected one of {sorted(model.part_regions)}")
    mask = np.zeros(model.m, dtype=bool)
    mask[model.part_regions[part]] = True
    return np.nonzero(mask[model.triangulation].all(axis=1))[0]


def hpr_visibility(points: np.ndarray, viewpoint: np.ndarray, gamma: float = HPR_GAMMA) -> VisibilityResult:
    """Hidden-point removal by spherical flipping.

    Points are moved to the viewpoint frame and flipped with
    p' = p + 2 (Rmax - ||p||) p / ||p||, Rmax = gamma * max ||p||; exactly the
    points whose flip lies on the convex hull of {p'} u {origin} are visible.
    """
    points = np.asarray(points, dtype=np.float64)
    viewpoint = np.asarray(viewpoint, dtype=np.float64).reshape(3)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {points.shape}")
    n = points.shape[0]
    if n < 4:
        raise ValueError("need at least 4 points")
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    q = points - viewpoint
    norms = np.linalg.norm(q, axis=1)
    center = 0.5 * (points.min(axis=0) + points.max(axis=0))
    radius = np.linalg.norm(points - center, axis=1).max()
    if np.linalg.norm(viewpoint - center) <= radius:
        raise ValueError("viewpoint must lie outside the point cloud's bounding sphere")

    rmax = gamma * norms.max()
    flipped = q + 2.0 * ((rmax - norms) / norms)[:, None] * q
    cloud = np.vstack([flipped, np.zeros(3)])
    try:
        hull = ConvexHull(cloud)
    except QhullError as exc:
        raise DegenerateHullError(f"convex hull failed: {exc}") from exc
    visible = np.zeros(n, dtype=bool)
    visible[hull.vertices[hull.vertices < n]] = True
    return VisibilityResult(visible)


def shape_visibility(fit: FitResult, gamma: float) -> np.ndarray:
    """Vertex visibility of a fitted shape, viewed along -z in its rotated frame."""
    rotated = fit.shape.vertices @ fit.rotation.R.T
    centroid = rotated.mean(axis=0)
    centered = rotated - centroid
    d = VIEW_DISTANCE_FACTOR * np.linalg.norm(centered, axis=1).max()
    return hpr_visibility(centered, np.array([0.0, 0.0, d]), gamma).visible


def _mask_valid(projected: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-vertex validity: projected point lands on a nonzero mask pixel."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"mask must be a non-empty 2D array, got shape {mask.shape}")
    h, w = mask.shape
    ix = np.floor(projected[:, 0] + 0.5).astype(np.int64)
    iy = np.floor(projected[:, 1] + 0.5).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    valid = np.zeros(projected.shape[0], dtype=bool)
    valid[inside] = mask[iy[inside], ix[inside]] != 0
    return valid


def select_valid_pairs(
    model: MorphableModel,
    fit_src: FitResult,
    fit_dst: FitResult,
    part: str,
    mask_src: np.ndarray,
    mask_dst: np.ndarray,
    gamma: float = HPR_GAMMA,
    visibility_src: np.ndarray | None = None,
    visibility_dst: np.ndarray | None = None,
) -> list[TrianglePair]:
    """Corresponding source/target triangles of a part that survive all filters.

    Filters, in order: part membership, hidden-point-removal visibility of all
    three vertices in both fits, mask validity of all projected vertices in
    both images, projected area >= MIN_TRIANGLE_AREA in both images. The
    optional precomputed visibility arrays let a caller amortize the hull
    computation across parts.
    """
    ids = part_triangles(model, part)
    if ids.size == 0:
        return []
    if visibility_src is None:
        visibility_src = shape_visibility(fit_src, gamma)
    if visibility_dst is None:
        visibility_dst = shape_visibility(fit_dst, gamma)
    tri = model.triangulation[ids]

    vis = visibility_src[tri].all(axis=1) & visibility_dst[tri].all(axis=1)
    ids, tri = ids[vis], tri[vis]
    if ids.size == 0:
        return []

    valid_src = _mask_valid(fit_src.projected, mask_src)
    valid_dst = _mask_valid(fit_dst.projected, mask_dst)
    ok = valid_src[tri].all(axis=1) & valid_dst[tri].all(axis=1)
    ids, tri = ids[ok], tri[ok]

    pairs = []
    for tid, verts in zip(ids, tri):
        src_px = fit_src.projected[verts]
        dst_px = fit_dst.projected[verts]
        if triangle_area(src_px) < MIN_TRIANGLE_AREA or triangle_area(dst_px) < MIN_TRIANGLE_AREA:
            continue
        pairs.append(TrianglePair(int(tid), src_px, dst_px))
    return pairs
