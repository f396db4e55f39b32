"""Cosine-similarity identification over unit-norm descriptors."""

from __future__ import annotations

import numpy as np


def cosine_matrix(probes: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """(n, g) cosine similarities; inputs are assumed L2-normalized rows."""
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    return probes @ gallery.T


def rank1_identify(probes: np.ndarray, gallery: np.ndarray, gallery_ids: list) -> list:
    """Most-similar gallery identity per probe; ties break to the lowest index."""
    if len(gallery_ids) < 2:
        raise ValueError("gallery needs at least 2 identities")
    if np.asarray(gallery).shape[0] != len(gallery_ids):
        raise ValueError("one gallery descriptor per identity required")
    sims = cosine_matrix(probes, gallery)
    best = sims.argmax(axis=1)  # argmax picks the first (lowest-index) maximum
    return [gallery_ids[i] for i in best]
