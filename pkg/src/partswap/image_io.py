"""Image and landmark file I/O.

Images are 8-bit numpy arrays, (H, W) grayscale or (H, W, 3) RGB, loaded and
saved through lossless PNG-class formats. Landmark files are structured text:
68 "x y" pixel pairs in the canonical ordering, origin at the top-left,
x rightward, y downward; blank lines and '#' comments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

N_LANDMARKS = 68


@dataclass(frozen=True)
class RasterImage:
    """8-bit image with an optional 8-bit validity mask (nonzero = valid)."""

    pixels: np.ndarray  # (H, W, C) uint8
    mask: np.ndarray | None = None  # (H, W) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3:
            raise ValueError(f"pixels must be (H, W) or (H, W, C), got shape {px.shape}")
        object.__setattr__(self, "pixels", px)
        if self.mask is not None:
            mask = np.asarray(self.mask)
            if mask.dtype != np.uint8 or mask.shape != px.shape[:2]:
                raise ValueError(
                    f"mask must be uint8 with shape {px.shape[:2]}, got {mask.dtype} {mask.shape}"
                )
            object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def load_image(path) -> np.ndarray:
    """Read an image as (H, W, 3) uint8 RGB (grayscale files are expanded)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def save_image(array: np.ndarray, path):
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {arr.dtype}")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def load_mask(path) -> np.ndarray:
    """Read a validity mask as (H, W) uint8; nonzero means valid face pixel."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L"))


def load_landmarks(path) -> np.ndarray:
    """Parse a 68-point landmark text file into a (68, 2) float64 array."""
    points = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'x y', got {text!r}")
            points.append((float(fields[0]), float(fields[1])))
    if len(points) != N_LANDMARKS:
        raise ValueError(f"{path}: expected {N_LANDMARKS} landmarks, found {len(points)}")
    out = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{path}: landmarks contain non-finite values")
    return out


def save_landmarks(points: np.ndarray, path):
    points = np.asarray(points, dtype=np.float64)
    if points.shape != (N_LANDMARKS, 2):
        raise ValueError(f"expected ({N_LANDMARKS}, 2) landmarks, got {points.shape}")
    with open(path, "w") as fh:
        for x, y in points:
            fh.write(f"{x:.6f} {y:.6f}\n")
