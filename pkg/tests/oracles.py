"""Independent oracles used to verify pipeline operations.

These deliberately avoid the code paths they check: visibility by brute-force
ray casting against the triangulated surface, ridge regression by a dense
augmented least-squares solve.
"""

import numpy as np

_EPS = 1e-12


def raycast_visibility(points, triangles, viewpoint, shrink=1e-6):
    """Brute-force visibility: vertex i is visible iff the open segment from the
    viewpoint to the (slightly pulled-forward) vertex hits no triangle.

    points: (n, 3); triangles: (t, 3) vertex indices; viewpoint: (3,).
    `shrink` pulls the ray end toward the viewer so a vertex's own incident
    triangles do not count as blockers.
    """
    points = np.asarray(points, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    viewpoint = np.asarray(viewpoint, dtype=np.float64)

    v0 = points[triangles[:, 0]]
    e1 = points[triangles[:, 1]] - v0
    e2 = points[triangles[:, 2]] - v0

    visible = np.ones(points.shape[0], dtype=bool)
    for i, p in enumerate(points):
        direction = p - viewpoint
        # Moller-Trumbore, all triangles at once.
        h = np.cross(direction, e2)
        det = np.einsum("ij,ij->i", e1, h)
        ok = np.abs(det) > _EPS
        inv = np.zeros_like(det)
        inv[ok] = 1.0 / det[ok]
        s = viewpoint - v0
        u = np.einsum("ij,ij->i", s, h) * inv
        q = np.cross(s, e1)
        v = np.einsum("j,ij->i", direction, q) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        hit = (
            ok
            & (u >= -_EPS)
            & (v >= -_EPS)
            & (u + v <= 1.0 + _EPS)
            & (t > _EPS)
            & (t < 1.0 - shrink)
        )
        if hit.any():
            visible[i] = False
    return visible


def fibonacci_sphere(n, radius=1.0):
    """Deterministic, nearly uniform points on a sphere."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return radius * np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def dense_ridge(X, r, lam, weights):
    """Weighted ridge via augmented least squares (independent of the normal
    equations): minimizes ||X a - r||^2 + lam * ||a / weights||^2."""
    k = X.shape[1]
    aug = np.vstack([X, np.sqrt(lam) * np.diag(1.0 / np.asarray(weights))])
    rhs = np.concatenate([r, np.zeros(k)])
    return np.linalg.lstsq(aug, rhs, rcond=None)[0]
