"""Gradient-domain merge of the warped region into the target photograph.

Solves the discrete Poisson equation over the interior region with the
warped canvas's gradients as guidance and the target as Dirichlet boundary:

    sum_{q in N4(p)} (f_p - f_q) = sum_{q in N4(p)} (g_p - g_q),  p in Omega

per channel, on float64 buffers, with a Jacobi-preconditioned conjugate
gradient; quantization to 8 bit happens once at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConvergenceError
from .patch_warp import WarpCanvas

DEFAULT_TOL = 1e-6
MAX_CG_ITERATIONS = 10_000
MIN_COMPONENT_PIXELS = 9


@dataclass(frozen=True)
class BlendRegion:
    """Interior pixels to solve for; the 4-adjacent outside ring is the boundary."""

    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()


@dataclass(frozen=True)
class GuidanceField:
    """Forward-difference gradients of the guidance image, per channel."""

    gx: np.ndarray  # (H, W, C); gx[y, x] = g[y, x+1] - g[y, x], last column 0
    gy: np.ndarray  # (H, W, C); gy[y, x] = g[y+1, x] - g[y, x], last row 0

    def __post_init__(self):
        if self.gx.shape != self.gy.shape:
            raise ValueError("gx and gy must have identical shapes")
        if not (np.all(np.isfinite(self.gx)) and np.all(np.isfinite(self.gy))):
            raise ValueError("guidance gradients must be finite")

    @classmethod
    def from_image(cls, image: np.ndarray) -> "GuidanceField":
        g = np.asarray(image, dtype=np.float64)
        if g.ndim == 2:
            g = g[:, :, None]
        gx = np.zeros_like(g)
        gy = np.zeros_like(g)
        gx[:, :-1] = g[:, 1:] - g[:, :-1]
        gy[:-1, :] = g[1:] - g[:-1]
        return cls(gx, gy)


def build_region(written: np.ndarray) -> BlendRegion:
    """Interior region from a coverage map: erode 1 px, drop border pixels and
    connected components smaller than MIN_COMPONENT_PIXELS."""
    written = np.asarray(written, dtype=bool)
    if written.ndim != 2:
        raise ValueError(f"coverage map must be 2D, got shape {written.shape}")
    omega = ndimage.binary_erosion(written)
    omega[0, :] = omega[-1, :] = False
    omega[:, 0] = omega[:, -1] = False
    labels, n = ndimage.label(omega)
    if n:
        counts = np.bincount(labels.ravel())
        small = np.nonzero(counts < MIN_COMPONENT_PIXELS)[0]
        omega[np.isin(labels, small[small > 0])] = False
    return BlendRegion(omega)


def _laplacian_rhs(guidance: GuidanceField, rows, cols, channel: int) -> np.ndarray:
    gx, gy = guidance.gx[:, :, channel], guidance.gy[:, :, channel]
    # 4 g_p - sum of neighbors, written as the negative divergence of (gx, gy).
    return (
        gx[rows, cols - 1]
        - gx[rows, cols]
        + gy[rows - 1, cols]
        - gy[rows, cols]
    )


def solve_poisson(
    target: np.ndarray,
    guidance: GuidanceField,
    region: BlendRegion,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_CG_ITERATIONS,
):
    """Solve the blend per channel on float64 buffers.

    Returns (solution, residuals): the full-image float64 array equal to the
    target outside the region, and the final relative residual per channel.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = np.asarray(target, dtype=np.float64)
    if f.ndim == 2:
        f = f[:, :, None]
    h, w, n_channels = f.shape
    if guidance.gx.shape != f.shape:
        raise ValueError(
            f"guidance shape {guidance.gx.shape} does not match target shape {f.shape}"
        )
    if region.mask.shape != (h, w):
        raise ValueError(
            f"region shape {region.mask.shape} does not match target shape {(h, w)}"
        )
    out = f.copy()
    if region.is_empty:
        return out, np.zeros(n_channels)

    omega = region.mask
    if omega[0, :].any() or omega[-1, :].any() or omega[:, 0].any() or omega[:, -1].any():
        raise ValueError("region touches the image border; erode it first")
    rows, cols = np.nonzero(omega)
    n = rows.size
    index = np.full((h, w), -1, dtype=np.int64)
    index[rows, cols] = np.arange(n)

    # Assemble the 4-neighbor Laplacian once; Dirichlet terms go per channel.
    entries_i = [np.arange(n)]
    entries_j = [np.arange(n)]
    entries_v = [np.full(n, 4.0)]
    boundary = []  # (linear index p, boundary row, boundary col)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = rows + dr, cols + dc
        inside = index[nr, nc] >= 0
        entries_i.append(np.nonzero(inside)[0])
        entries_j.append(index[nr[inside], nc[inside]])
        entries_v.append(np.full(int(inside.sum()), -1.0))
        boundary.append((np.nonzero(~inside)[0], nr[~inside], nc[~inside]))
    A = sparse.csr_matrix(
        (np.concatenate(entries_v), (np.concatenate(entries_i), np.concatenate(entries_j))),
        shape=(n, n),
    )
    precond = LinearOperator((n, n), matvec=lambda v: 0.25 * v)

    residuals = np.zeros(n_channels)
    for ch in range(n_channels):
        b = _laplacian_rhs(guidance, rows, cols, ch)
        for p_idx, br, bc in boundary:
            np.add.at(b, p_idx, f[br, bc, ch])
        x0 = f[rows, cols, ch]
        solution, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iterations, M=precond)
        b_norm = np.linalg.norm(b)
        res = float(np.linalg.norm(A @ solution - b) / b_norm) if b_norm > 0 else 0.0
        if info != 0:
            raise ConvergenceError(
                f"Poisson solve did not converge within {max_iterations} iterations", res
            )
        residuals[ch] = res
        out[rows, cols, ch] = solution
    return out, residuals


def _quantize(values: np.ndarray) -> np.ndarray:
    clipped = np.clip(values, 0.0, 255.0)
    return np.floor(clipped + 0.5).astype(np.uint8)  # round half away from zero


def seamless_clone(
    target,
    canvas: WarpCanvas,
    region: BlendRegion,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_CG_ITERATIONS,
) -> np.ndarray:
    """Blend the warped canvas into the 8-bit target over the region.

    The output equals the target bit-exactly outside the region; inside, the
    Poisson solution is quantized with round-half-away-from-zero. The target
    may be an array or anything with a `pixels` attribute.
    """
    target = np.asarray(getattr(target, "pixels", target))
    squeeze = target.ndim == 2
    t3 = target[:, :, None] if squeeze else target
    if canvas.pixels.shape != t3.shape:
        raise ValueError(
            f"canvas shape {canvas.pixels.shape} does not match target shape {t3.shape}"
        )
    out = t3.copy()
    if not region.is_empty:
        guidance = GuidanceField.from_image(canvas.pixels)
        solution, _ = solve_poisson(t3, guidance, region, tol, max_iterations)
        out[region.mask] = _quantize(solution[region.mask])
    return out[:, :, 0] if squeeze else out
