"""Per-triangle affine patch transfer into the target image.

Each destination triangle is rasterized with a half-open top-left fill rule
(shared edges get exactly one owner, so fans rasterize hole- and overlap-free)
and filled by inverse-mapping pixel centers through the affine and bilinearly
sampling the source. Pixel (row, col) has its center at (x=col, y=row).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularWarpError
from .region_select import MIN_TRIANGLE_AREA, TrianglePair, triangle_area


@dataclass(frozen=True)
class Affine2D:
    M: np.ndarray  # (2, 2)
    b: np.ndarray  # (2,)

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.float64).reshape(2, 2)
        b = np.asarray(self.b, dtype=np.float64).reshape(2)
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(b))):
            raise ValueError("affine parameters must be finite")
        M.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "b", b)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.M.T + self.b


@dataclass
class WarpCanvas:
    """Mutable working buffer at target dimensions plus a coverage map."""

    pixels: np.ndarray  # (H, W, C) float64
    written: np.ndarray  # (H, W) bool

    @classmethod
    def for_target(cls, height: int, width: int, channels: int) -> "WarpCanvas":
        return cls(
            pixels=np.zeros((height, width, channels), dtype=np.float64),
            written=np.zeros((height, width), dtype=bool),
        )


def triangle_affine(src: np.ndarray, dst: np.ndarray, min_area: float = MIN_TRIANGLE_AREA) -> Affine2D:
    """The unique affine map sending the three src vertices onto the dst ones."""
    src = np.asarray(src, dtype=np.float64).reshape(3, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(3, 2)
    if triangle_area(src) < min_area or triangle_area(dst) < min_area:
        raise SingularWarpError(
            f"triangle area below {min_area} px^2 (src {triangle_area(src):.3g}, "
            f"dst {triangle_area(dst):.3g})"
        )
    # [x y 1] @ P = dst with P = [[m11 m21], [m12 m22], [b1 b2]]
    S = np.column_stack([src, np.ones(3)])
    try:
        P = np.linalg.solve(S, dst)
    except np.linalg.LinAlgError as exc:
        raise SingularWarpError(f"collinear source triangle: {exc}") from exc
    return Affine2D(P[:2].T, P[2])


def _edge_inclusive(d: np.ndarray) -> bool:
    # Half-open ownership: an on-edge pixel belongs to the triangle whose edge
    # points up, or left when exactly horizontal (screen coords, y down).
    return d[1] < 0 or (d[1] == 0 and d[0] > 0)


def covered_pixels(tri: np.ndarray, height: int, width: int):
    """(rows, cols) of pixel centers covered by a triangle under the fill rule."""
    tri = np.asarray(tri, dtype=np.float64).reshape(3, 2)
    v0, v1, v2 = tri
    s = (v1[0] - v0[0]) * (v2[1] - v0[1]) - (v1[1] - v0[1]) * (v2[0] - v0[0])
    if s == 0.0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if s < 0.0:
        v1, v2 = v2, v1

    x_lo = max(int(np.ceil(tri[:, 0].min())), 0)
    x_hi = min(int(np.floor(tri[:, 0].max())), width - 1)
    y_lo = max(int(np.ceil(tri[:, 1].min())), 0)
    y_hi = min(int(np.floor(tri[:, 1].max())), height - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return np.empty(0, np.int64), np.empty(0, np.int64)

    xs = np.arange(x_lo, x_hi + 1, dtype=np.float64)
    ys = np.arange(y_lo, y_hi + 1, dtype=np.float64)
    px, py = np.meshgrid(xs, ys)
    covered = np.ones(px.shape, dtype=bool)
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        d = b - a
        e = d[0] * (py - a[1]) - d[1] * (px - a[0])
        covered &= (e > 0) | ((e == 0) & _edge_inclusive(d))
    rows, cols = np.nonzero(covered)
    return rows + y_lo, cols + x_lo


def _bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup at float coordinates, clamped at the image border."""
    h, w = image.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]
    top = image[y0, x0] * (1.0 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1.0 - fx) + image[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def warp_pairs(src_image, pairs: list[TrianglePair], canvas: WarpCanvas) -> WarpCanvas:
    """Transfer every pair's source patch into the canvas at its destination.

    Pairs are processed in ascending triangle id; where destinations overlap,
    the later id wins. Out-of-canvas destination area is clipped. The source
    may be an array or anything with a `pixels` attribute.
    """
    src = np.asarray(getattr(src_image, "pixels", src_image))
    if src.ndim == 2:
        src = src[:, :, None]
    src = src.astype(np.float64, copy=False)
    if src.shape[2] != canvas.pixels.shape[2]:
        raise ValueError(
            f"source has {src.shape[2]} channels, canvas expects {canvas.pixels.shape[2]}"
        )
    height, width = canvas.pixels.shape[:2]
    for pair in sorted(pairs, key=lambda p: p.triangle_id):
        inverse = triangle_affine(pair.dst_px, pair.src_px)
        rows, cols = covered_pixels(pair.dst_px, height, width)
        if rows.size == 0:
            continue
        pts = np.column_stack([cols.astype(np.float64), rows.astype(np.float64)])
        src_pts = inverse.apply(pts)
        canvas.pixels[rows, cols] = _bilinear_sample(src, src_pts[:, 0], src_pts[:, 1])
        canvas.written[rows, cols] = True
    return canvas
