"""End-to-end part swapping: fit both images, select, warp, blend.

One job is a self-contained, deterministic computation against an immutable
model; batches may run jobs concurrently.
"""

from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .model_core import MorphableModel, PART_NAMES
from .patch_warp import WarpCanvas, warp_pairs
from .region_select import HPR_GAMMA, part_triangles, select_valid_pairs, shape_visibility
from .seamless_blend import DEFAULT_TOL, build_region, seamless_clone
from .shape_fit import FitParams, FitResult, fit_image
from . import image_io

logger = logging.getLogger(__name__)

# Landmarks may overshoot the frame by this fraction of its size.
_LANDMARK_MARGIN = 0.10


class SwapStatus(enum.Enum):
    SWAPPED = "swapped"
    NOTHING_SWAPPED = "nothing-swapped"


@dataclass(frozen=True)
class ImageBundle:
    """A photograph with its 68 landmarks and an optional validity mask."""

    image: np.ndarray  # (H, W, C) uint8
    landmarks: np.ndarray  # (68, 2) float64 pixels
    mask: np.ndarray = None  # (H, W) uint8; defaults to all-valid

    def __post_init__(self):
        img = np.asarray(self.image)
        if img.dtype != np.uint8:
            raise ValueError(f"image must be uint8, got {img.dtype}")
        if img.ndim == 2:
            img = img[:, :, None]
        if img.ndim != 3:
            raise ValueError(f"image must be (H, W[, C]), got shape {img.shape}")
        object.__setattr__(self, "image", img)
        lm = np.asarray(self.landmarks, dtype=np.float64)
        if lm.shape != (68, 2):
            raise ValueError(f"expected (68, 2) landmarks, got {lm.shape}")
        h, w = img.shape[:2]
        mx, my = _LANDMARK_MARGIN * w, _LANDMARK_MARGIN * h
        if (
            lm[:, 0].min() < -mx
            or lm[:, 0].max() > w - 1 + mx
            or lm[:, 1].min() < -my
            or lm[:, 1].max() > h - 1 + my
        ):
            raise ValueError("landmarks fall outside the image bounds (plus 10% margin)")
        object.__setattr__(self, "landmarks", lm)
        if self.mask is None:
            object.__setattr__(self, "mask", np.full((h, w), 255, dtype=np.uint8))
        else:
            mask = np.asarray(self.mask)
            if mask.shape != (h, w):
                raise ValueError(f"mask shape {mask.shape} does not match image {(h, w)}")
            object.__setattr__(self, "mask", mask.astype(np.uint8, copy=False))


@dataclass(frozen=True)
class SwapJob:
    source: ImageBundle
    target: ImageBundle
    parts: tuple
    fit_params: FitParams = FitParams()
    blend_tol: float = DEFAULT_TOL
    gamma: float = HPR_GAMMA
    debug_dir: str = None

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("parts must be non-empty")
        unknown = [p for p in parts if p not in PART_NAMES]
        if unknown:
            raise ValueError(f"unknown parts {unknown}; expected subset of {PART_NAMES}")
        if "full" in parts and len(parts) > 1:
            raise ValueError("'full' is exclusive of other parts in one job")
        if len(set(parts)) != len(parts):
            raise ValueError("duplicate part names")
        object.__setattr__(self, "parts", parts)
        if self.blend_tol <= 0:
            raise ValueError("blend_tol must be positive")


@dataclass(frozen=True)
class SwapResult:
    image: np.ndarray  # (H, W, C) uint8
    status: SwapStatus
    pair_count: int
    valid_pair_fraction: float  # kept pairs / candidate part triangles
    fit_src: FitResult = field(repr=False, default=None)
    fit_dst: FitResult = field(repr=False, default=None)

    @property
    def nothing_swapped(self) -> bool:
        return self.status is SwapStatus.NOTHING_SWAPPED


def run_swap(model: MorphableModel, job: SwapJob) -> SwapResult:
    """Execute the full pipeline and return the blended image with its status."""
    fit_src = fit_image(job.source.landmarks, model, job.fit_params)
    fit_dst = fit_image(job.target.landmarks, model, job.fit_params)

    vis_src = shape_visibility(fit_src, job.gamma)
    vis_dst = shape_visibility(fit_dst, job.gamma)
    pairs_by_id = {}
    n_candidates = 0
    for part in job.parts:
        n_candidates += part_triangles(model, part).size
        for pair in select_valid_pairs(
            model,
            fit_src,
            fit_dst,
            part,
            job.source.mask,
            job.target.mask,
            gamma=job.gamma,
            visibility_src=vis_src,
            visibility_dst=vis_dst,
        ):
            pairs_by_id[pair.triangle_id] = pair
    pairs = [pairs_by_id[tid] for tid in sorted(pairs_by_id)]
    fraction = len(pairs) / n_candidates if n_candidates else 0.0

    target_img = job.target.image
    if not pairs:
        result = SwapResult(
            target_img.copy(), SwapStatus.NOTHING_SWAPPED, 0, fraction, fit_src, fit_dst
        )
        _maybe_dump_debug(model, job, fit_src, fit_dst, vis_src, vis_dst, pairs, None, None)
        return result

    canvas = WarpCanvas.for_target(*target_img.shape[:2], target_img.shape[2])
    warp_pairs(job.source.image, pairs, canvas)
    region = build_region(canvas.written)
    if region.is_empty:
        result = SwapResult(
            target_img.copy(), SwapStatus.NOTHING_SWAPPED, len(pairs), fraction, fit_src, fit_dst
        )
        _maybe_dump_debug(model, job, fit_src, fit_dst, vis_src, vis_dst, pairs, canvas, region)
        return result

    blended = seamless_clone(target_img, canvas, region, job.blend_tol)
    result = SwapResult(blended, SwapStatus.SWAPPED, len(pairs), fraction, fit_src, fit_dst)
    _maybe_dump_debug(model, job, fit_src, fit_dst, vis_src, vis_dst, pairs, canvas, region)
    return result


# ---------------------------------------------------------------------------
# Debug artifacts
# ---------------------------------------------------------------------------

DEBUG_FILENAMES = (
    "fit_overlay.png",  # source | target with projected mesh and input landmarks
    "visibility.png",  # source | target vertex visibility
    "pair_wireframe.png",  # destination triangles over the target
    "canvas_preblend.png",  # warped patches before blending
    "region_mask.png",  # the blend region
)


def _maybe_dump_debug(model, job, fit_src, fit_dst, vis_src, vis_dst, pairs, canvas, region):
    if job.debug_dir is None:
        return
    try:
        dump_debug(model, job, fit_src, fit_dst, vis_src, vis_dst, pairs, canvas, region)
    except OSError as exc:  # diagnostics must never fail the swap
        logger.warning("debug dump failed: %s", exc)


def _draw_points(img: np.ndarray, points: np.ndarray, color, radius: int = 0):
    h, w = img.shape[:2]
    ix = np.floor(points[:, 0] + 0.5).astype(np.int64)
    iy = np.floor(points[:, 1] + 0.5).astype(np.int64)
    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            xs = np.clip(ix + dx, 0, w - 1)
            ys = np.clip(iy + dy, 0, h - 1)
            img[ys, xs] = color


def _draw_segment(img: np.ndarray, p0, p1, color):
    n = max(int(np.hypot(*(np.asarray(p1) - p0))) * 2, 2)
    ts = np.linspace(0.0, 1.0, n)
    pts = np.outer(1 - ts, p0) + np.outer(ts, p1)
    h, w = img.shape[:2]
    xs = np.clip(np.floor(pts[:, 0] + 0.5).astype(np.int64), 0, w - 1)
    ys = np.clip(np.floor(pts[:, 1] + 0.5).astype(np.int64), 0, h - 1)
    img[ys, xs] = color


def _side_by_side(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    h = max(left.shape[0], right.shape[0])
    w = left.shape[1] + right.shape[1]
    out = np.zeros((h, w, 3), dtype=np.uint8)
    out[: left.shape[0], : left.shape[1]] = left
    out[: right.shape[0], left.shape[1] :] = right
    return out


def dump_debug(model, job, fit_src, fit_dst, vis_src, vis_dst, pairs, canvas, region):
    """Write the five diagnostic images (DEBUG_FILENAMES) into job.debug_dir."""
    os.makedirs(job.debug_dir, exist_ok=True)

    def path(name):
        return os.path.join(job.debug_dir, name)

    panels = []
    for bundle, fit in ((job.source, fit_src), (job.target, fit_dst)):
        img = np.ascontiguousarray(bundle.image[:, :, :3]).copy()
        if img.shape[2] == 1:
            img = np.repeat(img, 3, axis=2)
        _draw_points(img, fit.projected, (60, 220, 60))
        _draw_points(img, bundle.landmarks, (255, 40, 40), radius=1)
        panels.append(img)
    image_io.save_image(_side_by_side(*panels), path(DEBUG_FILENAMES[0]))

    panels = []
    for bundle, fit, vis in ((job.source, fit_src, vis_src), (job.target, fit_dst, vis_dst)):
        img = np.zeros((*bundle.image.shape[:2], 3), dtype=np.uint8)
        _draw_points(img, fit.projected[vis], (255, 255, 255))
        _draw_points(img, fit.projected[~vis], (200, 30, 30))
        panels.append(img)
    image_io.save_image(_side_by_side(*panels), path(DEBUG_FILENAMES[1]))

    wire = np.ascontiguousarray(job.target.image[:, :, :3]).copy()
    if wire.shape[2] == 1:
        wire = np.repeat(wire, 3, axis=2)
    for pair in pairs:
        for i in range(3):
            _draw_segment(wire, pair.dst_px[i], pair.dst_px[(i + 1) % 3], (80, 170, 255))
    image_io.save_image(wire, path(DEBUG_FILENAMES[2]))

    h, w = job.target.image.shape[:2]
    if canvas is not None:
        pre = np.clip(canvas.pixels + 0.5, 0, 255).astype(np.uint8)
        if pre.shape[2] == 1:
            pre = np.repeat(pre, 3, axis=2)
        pre[~canvas.written] = 0
    else:
        pre = np.zeros((h, w, 3), dtype=np.uint8)
    image_io.save_image(pre, path(DEBUG_FILENAMES[3]))

    omega = np.zeros((h, w), dtype=np.uint8)
    if region is not None:
        omega[region.mask] = 255
    image_io.save_image(omega, path(DEBUG_FILENAMES[4]))
