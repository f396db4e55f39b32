"""Face descriptors behind one embed interface.

Every embedder takes an (H, W, 3) uint8 image plus its 68 landmarks and
returns an L2-normalized float64 vector, deterministically. Cropping follows
the backbone's declared tightness and is recorded in reports, since crop
context is known to change attribution behavior.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


class EmbedderUnavailable(RuntimeError):
    """The backbone cannot run here (missing dependency or weights)."""


def crop_face(image: np.ndarray, landmarks: np.ndarray, margin: float) -> np.ndarray:
    """Crop the landmark bounding box expanded by `margin` (fraction per side)."""
    h, w = image.shape[:2]
    x0, y0 = landmarks.min(axis=0)
    x1, y1 = landmarks.max(axis=0)
    mx, my = margin * (x1 - x0), margin * (y1 - y0)
    xa = max(int(np.floor(x0 - mx)), 0)
    ya = max(int(np.floor(y0 - my)), 0)
    xb = min(int(np.ceil(x1 + mx)) + 1, w)
    yb = min(int(np.ceil(y1 + my)) + 1, h)
    if xb <= xa or yb <= ya:
        raise ValueError("empty face crop")
    return image[ya:yb, xa:xb]


def _unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero descriptor")
    return v / norm


class MockBorderEmbedder:
    """Identity-coded descriptor for protocol tests.

    Reads the image frame (outermost pixels), which synthetic desk corpora
    paint with an identity-unique color; swaps never touch it. No face crop.
    """

    name = "mock"
    crop = "none"

    def __init__(self, border: int = 6):
        self.border = border

    def embed(self, image: np.ndarray, landmarks=None) -> np.ndarray:
        b = self.border
        strips = [image[:b].reshape(-1, 3), image[-b:].reshape(-1, 3),
                  image[:, :b].reshape(-1, 3), image[:, -b:].reshape(-1, 3)]
        mean = np.concatenate(strips).mean(axis=0)
        return _unit(mean + 1.0)  # +1 keeps pure-black borders nonzero


class PixelEmbedder:
    """Baseline descriptor: loosely cropped, downscaled grayscale pixels.

    Not a recognition network; treat its rows as a supplementary baseline.
    """

    name = "pixel"
    crop = "loose(0.25)"

    def __init__(self, size: int = 32, margin: float = 0.25):
        self.size = size
        self.margin = margin

    def embed(self, image: np.ndarray, landmarks=None) -> np.ndarray:
        patch = image if landmarks is None else crop_face(image, landmarks, self.margin)
        pil = Image.fromarray(patch).convert("L").resize(
            (self.size, self.size), Image.BILINEAR
        )
        v = np.asarray(pil, dtype=np.float64).reshape(-1)
        v = v - v.mean()
        if np.linalg.norm(v) == 0:
            v = v + 1.0
        return _unit(v)


class TorchScriptEmbedder:
    """Pretrained backbone loaded from a local TorchScript file.

    The module must map a float32 (1, 3, S, S) batch, normalized with the
    given mean/std, to a (1, D) descriptor. Runs on CPU, eval mode.
    """

    def __init__(self, path: str, name: str = None, input_size: int = 160,
                 margin: float = 0.1, mean: float = 127.5, std: float = 128.0):
        try:
            import torch
        except ImportError as exc:
            raise EmbedderUnavailable(f"torch not installed: {exc}") from exc
        self._torch = torch
        try:
            self.module = torch.jit.load(path, map_location="cpu").eval()
        except Exception as exc:
            raise EmbedderUnavailable(f"cannot load TorchScript file {path}: {exc}") from exc
        self.name = name or f"torchscript:{path}"
        self.crop = f"tight({margin})"
        self.input_size = input_size
        self.margin = margin
        self.mean = mean
        self.std = std

    def embed(self, image: np.ndarray, landmarks=None) -> np.ndarray:
        torch = self._torch
        patch = image if landmarks is None else crop_face(image, landmarks, self.margin)
        pil = Image.fromarray(patch).resize((self.input_size,) * 2, Image.BILINEAR)
        arr = (np.asarray(pil, dtype=np.float32) - self.mean) / self.std
        batch = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            out = self.module(batch)
        return _unit(out.squeeze(0).numpy())


def get_embedder(spec: str):
    """Resolve an embedder spec: 'mock', 'pixel', or 'torchscript:<path>[:<size>]'."""
    if spec == "mock":
        return MockBorderEmbedder()
    if spec == "pixel":
        return PixelEmbedder()
    if spec.startswith("torchscript:"):
        parts = spec.split(":")
        path = parts[1]
        size = int(parts[2]) if len(parts) > 2 else 160
        return TorchScriptEmbedder(path, input_size=size)
    raise ValueError(f"unknown embedder spec {spec!r}")
