"""3D morphable face model: container, file formats, shape synthesis, synthetic generator.

The model frame is image-aligned: +x right, +y down, +z toward the camera.
A frontal face therefore projects upright under the identity camera and is
viewed from (0, 0, +d).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .errors import ModelFormatError

N_LANDMARKS = 68
PART_NAMES = ("eyes", "nose", "mouth", "full")

_MAGIC = b"FPSM"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Shape3D:
    """A dense 3D face: (m, 3) float64 vertex array."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (m, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite coordinates")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]


@dataclass(frozen=True)
class MorphableModel:
    """Mean shape + linear deformation dictionary + mesh annotations.

    Immutable after construction; safe to share across concurrent fits.
    """

    mean_shape: np.ndarray  # (m, 3) float64
    dictionary: np.ndarray  # (k, m, 3) float64
    reg_weights: np.ndarray  # (k,) float64, strictly positive
    landmark_indices: np.ndarray  # (68,) uint32
    part_regions: dict  # name -> sorted (n,) uint32 vertex indices
    triangulation: np.ndarray  # (t, 3) uint32

    def __post_init__(self):
        object.__setattr__(self, "mean_shape", _freeze(self.mean_shape, np.float64))
        object.__setattr__(self, "dictionary", _freeze(self.dictionary, np.float64))
        object.__setattr__(self, "reg_weights", _freeze(self.reg_weights, np.float64))
        object.__setattr__(
            self, "landmark_indices", _freeze(self.landmark_indices, np.uint32)
        )
        object.__setattr__(self, "triangulation", _freeze(self.triangulation, np.uint32))
        regions = {
            str(name): _freeze(np.sort(np.asarray(idx)), np.uint32)
            for name, idx in self.part_regions.items()
        }
        object.__setattr__(self, "part_regions", regions)
        self.validate()

    @property
    def m(self) -> int:
        return self.mean_shape.shape[0]

    @property
    def k(self) -> int:
        return self.dictionary.shape[0]

    def validate(self):
        """Check all structural invariants; raise ModelFormatError naming the bad field."""
        if self.mean_shape.ndim != 2 or self.mean_shape.shape[1] != 3:
            raise ModelFormatError("mean_shape", f"expected (m, 3), got {self.mean_shape.shape}")
        if not np.all(np.isfinite(self.mean_shape)):
            raise ModelFormatError("mean_shape", "non-finite coordinates")
        m = self.mean_shape.shape[0]
        if self.dictionary.ndim != 3 or self.dictionary.shape[1:] != (m, 3):
            raise ModelFormatError(
                "dictionary",
                f"dimension mismatch: expected (k, {m}, 3), got {self.dictionary.shape}",
            )
        if not np.all(np.isfinite(self.dictionary)):
            raise ModelFormatError("dictionary", "non-finite entries")
        k = self.dictionary.shape[0]
        if self.reg_weights.shape != (k,):
            raise ModelFormatError(
                "reg_weights", f"expected ({k},), got {self.reg_weights.shape}"
            )
        if not np.all(self.reg_weights > 0):
            bad = int(np.argmin(self.reg_weights))
            raise ModelFormatError(
                "reg_weights", f"non-positive weight {self.reg_weights[bad]} at index {bad}"
            )
        if self.landmark_indices.shape != (N_LANDMARKS,):
            raise ModelFormatError(
                "landmark_indices",
                f"expected ({N_LANDMARKS},), got {self.landmark_indices.shape}",
            )
        if np.any(self.landmark_indices >= m):
            bad = int(np.argmax(self.landmark_indices))
            raise ModelFormatError(
                "landmark_indices",
                f"index out of range: {self.landmark_indices[bad]} >= m = {m}",
            )
        if self.triangulation.ndim != 2 or self.triangulation.shape[1] != 3:
            raise ModelFormatError(
                "triangulation", f"expected (t, 3), got {self.triangulation.shape}"
            )
        if np.any(self.triangulation >= m):
            raise ModelFormatError("triangulation", f"vertex index out of range (m = {m})")
        tri = self.triangulation
        same = (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
        if np.any(same):
            raise ModelFormatError(
                "triangulation", f"triangle {int(np.argmax(same))} has repeated vertices"
            )
        for name in PART_NAMES:
            if name not in self.part_regions:
                raise ModelFormatError("part_regions", f"missing region {name!r}")
        for name, idx in self.part_regions.items():
            if idx.size and idx.max() >= m:
                raise ModelFormatError(
                    "part_regions", f"index out of range in region {name!r} (m = {m})"
                )
        inner = np.union1d(
            np.union1d(self.part_regions["eyes"], self.part_regions["nose"]),
            self.part_regions["mouth"],
        )
        if not np.isin(inner, self.part_regions["full"]).all():
            raise ModelFormatError(
                "part_regions", "region 'full' is not a superset of eyes/nose/mouth"
            )


def _freeze(arr, dtype) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=dtype))
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def deform_shape(model: MorphableModel, alpha: np.ndarray) -> Shape3D:
    """Synthesize a shape: S = mean + sum_i alpha_i * dictionary_i."""
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.shape != (model.k,):
        raise ValueError(f"expected {model.k} coefficients, got {alpha.shape[0]}")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("coefficients contain non-finite values")
    verts = model.mean_shape + np.tensordot(alpha, model.dictionary, axes=1)
    return Shape3D(verts)


def extract_landmarks3d(model: MorphableModel, shape: Shape3D) -> np.ndarray:
    """Return the shape's 68 landmark vertices, (68, 3), in index order."""
    if shape.n_vertices != model.m:
        raise ValueError(
            f"shape has {shape.n_vertices} vertices, model expects {model.m}"
        )
    return shape.vertices[model.landmark_indices]


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------
#
# Binary container (little-endian), versioned:
#   magic "FPSM" | u32 format_version | u64 m | u64 k
#   mean_shape        m*3 f64, row-major
#   dictionary        k*m*3 f64
#   reg_weights       k f64
#   landmark_indices  68 u32
#   triangulation     u64 count, then count*3 u32
#   part_regions      u32 n_regions, then per region:
#                     u16 name_len | name utf-8 | u64 count | count u32
#
# A JSON variant with identical field names is accepted for desk-scale models
# (detected by the missing magic).

def save_model(model: MorphableModel, path, text: bool = False):
    """Write a model file; `text=True` (or a .json suffix) selects the JSON variant."""
    path = str(path)
    if text or path.endswith(".json"):
        doc = {
            "format_version": FORMAT_VERSION,
            "m": model.m,
            "k": model.k,
            "mean_shape": model.mean_shape.tolist(),
            "dictionary": model.dictionary.tolist(),
            "reg_weights": model.reg_weights.tolist(),
            "landmark_indices": model.landmark_indices.tolist(),
            "triangulation": model.triangulation.tolist(),
            "part_regions": {n: v.tolist() for n, v in model.part_regions.items()},
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
        return
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQ", FORMAT_VERSION, model.m, model.k))
        fh.write(model.mean_shape.astype("<f8").tobytes())
        fh.write(model.dictionary.astype("<f8").tobytes())
        fh.write(model.reg_weights.astype("<f8").tobytes())
        fh.write(model.landmark_indices.astype("<u4").tobytes())
        fh.write(struct.pack("<Q", model.triangulation.shape[0]))
        fh.write(model.triangulation.astype("<u4").tobytes())
        fh.write(struct.pack("<I", len(model.part_regions)))
        for name, idx in model.part_regions.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<Q", idx.shape[0]))
            fh.write(idx.astype("<u4").tobytes())


def load_model(path) -> MorphableModel:
    """Load a model file (binary or JSON variant) and validate all invariants."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] == _MAGIC:
        return _parse_binary(blob)
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError("header", f"not a model file: {exc}") from exc
    return _parse_json(doc)


class _Cursor:
    def __init__(self, blob: bytes, offset: int):
        self.blob = blob
        self.offset = offset

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.blob):
            raise ModelFormatError("header", "truncated file")
        vals = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return vals

    def array(self, dtype, count: int, field: str) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.offset + size > len(self.blob):
            raise ModelFormatError(field, "truncated file")
        out = np.frombuffer(self.blob, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return out


def _parse_binary(blob: bytes) -> MorphableModel:
    cur = _Cursor(blob, 4)
    version, m, k = cur.unpack("<IQQ")
    if version != FORMAT_VERSION:
        raise ModelFormatError("format_version", f"unsupported version {version}")
    mean = cur.array("<f8", m * 3, "mean_shape").reshape(m, 3)
    dictionary = cur.array("<f8", k * m * 3, "dictionary").reshape(k, m, 3)
    weights = cur.array("<f8", k, "reg_weights")
    landmarks = cur.array("<u4", N_LANDMARKS, "landmark_indices")
    (n_tri,) = cur.unpack("<Q")
    tri = cur.array("<u4", n_tri * 3, "triangulation").reshape(n_tri, 3)
    (n_regions,) = cur.unpack("<I")
    regions = {}
    for _ in range(n_regions):
        (name_len,) = cur.unpack("<H")
        name = blob[cur.offset : cur.offset + name_len].decode("utf-8")
        cur.offset += name_len
        (count,) = cur.unpack("<Q")
        regions[name] = cur.array("<u4", count, "part_regions")
    return MorphableModel(mean, dictionary, weights, landmarks, regions, tri)


def _parse_json(doc: dict) -> MorphableModel:
    for key in (
        "format_version",
        "m",
        "k",
        "mean_shape",
        "dictionary",
        "reg_weights",
        "landmark_indices",
        "triangulation",
        "part_regions",
    ):
        if key not in doc:
            raise ModelFormatError(key, "missing field")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError("format_version", f"unsupported version {doc['format_version']}")
    m, k = int(doc["m"]), int(doc["k"])

    def as_array(value, dtype, field):
        try:
            return np.asarray(value, dtype=dtype)
        except (ValueError, TypeError) as exc:
            raise ModelFormatError(field, f"dimension mismatch or bad value: {exc}") from exc

    mean = as_array(doc["mean_shape"], np.float64, "mean_shape")
    if mean.shape != (m, 3):
        raise ModelFormatError("mean_shape", f"expected ({m}, 3), got {mean.shape}")
    dictionary = as_array(doc["dictionary"], np.float64, "dictionary")
    if dictionary.shape != (k, m, 3):
        raise ModelFormatError(
            "dictionary", f"dimension mismatch: expected ({k}, {m}, 3), got {dictionary.shape}"
        )
    tri = as_array(doc["triangulation"], np.int64, "triangulation")
    if tri.ndim != 2 or tri.shape[1] != 3 or (tri.size and tri.min() < 0):
        raise ModelFormatError("triangulation", "expected non-negative index triples")
    landmarks = as_array(doc["landmark_indices"], np.int64, "landmark_indices")
    if landmarks.ndim != 1 or (landmarks.size and landmarks.min() < 0):
        raise ModelFormatError("landmark_indices", "expected non-negative indices")
    if landmarks.size and landmarks.max() >= m:
        raise ModelFormatError(
            "landmark_indices", f"index out of range: {landmarks.max()} >= m = {m}"
        )
    regions = {
        str(n): as_array(v, np.int64, "part_regions") for n, v in doc["part_regions"].items()
    }
    for n, v in regions.items():
        if v.size and (v.min() < 0 or v.max() >= m):
            raise ModelFormatError("part_regions", f"index out of range in region {n!r} (m = {m})")
    return MorphableModel(
        mean, dictionary, np.asarray(doc["reg_weights"], dtype=np.float64), landmarks, regions, tri
    )


# ---------------------------------------------------------------------------
# Synthetic model generator (test substitute for a learned model asset)
# ---------------------------------------------------------------------------

# Face half-axes in model units; y grows downward.
_FACE_AX, _FACE_AY = 1.0, 1.3
_DOME_HEIGHT = 0.50
_NOSE_HEIGHT = 0.26
_NOSE_CENTER = (0.0, 0.12)
_NOSE_SIGMA = (0.30, 0.34)
_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class SyntheticReference:
    """Ground truth recorded by the generator, for oracle tests."""

    landmark_points: np.ndarray  # (68, 3) exact landmark vertex positions
    region_triangles: dict  # part name -> sorted array of triangle ids


def _height_field(x, y):
    u2 = (x / _FACE_AX) ** 2 + (y / _FACE_AY) ** 2
    z = _DOME_HEIGHT * np.clip(1.0 - u2, 0.0, None)
    cx, cy = _NOSE_CENTER
    sx, sy = _NOSE_SIGMA
    z = z + _NOSE_HEIGHT * np.exp(-(((x - cx) / sx) ** 2 + ((y - cy) / sy) ** 2))
    return z


def _canonical_landmarks() -> np.ndarray:
    """68 (x, y) landmark positions in the model frame, canonical ordering."""
    pts = np.zeros((N_LANDMARKS, 2))
    # 0-16 jaw: temple -> chin -> temple
    t = np.linspace(0.0, 1.0, 17)
    pts[0:17, 0] = -0.95 * np.cos(np.pi * t)
    pts[0:17, 1] = 0.05 + 1.15 * np.sin(np.pi * t)
    # 17-26 brows (outer -> inner on the left, inner -> outer on the right)
    j = np.arange(5)
    arc = 0.58 + 0.10 * np.sin(np.pi * j / 4)
    pts[17:22, 0] = -0.62 + 0.105 * j
    pts[17:22, 1] = -arc
    pts[22:27, 0] = 0.20 + 0.105 * j
    pts[22:27, 1] = -arc[::-1]
    # 27-30 nose bridge, 31-35 nose base
    pts[27:31, 0] = 0.0
    pts[27:31, 1] = -0.38 + 0.14 * np.arange(4)
    pts[31:36, 0] = -0.16 + 0.08 * j
    pts[31:36, 1] = 0.16 + 0.05 * (1.0 - np.abs(j - 2) / 2.0)
    # 36-47 eyes (hexagons, corner-first)
    theta = np.deg2rad([180.0, 120.0, 60.0, 0.0, -60.0, -120.0])
    for sign, base in ((-1.0, 36), (1.0, 42)):
        pts[base : base + 6, 0] = sign * 0.40 + 0.15 * np.cos(theta)
        pts[base : base + 6, 1] = -0.35 - 0.07 * np.sin(theta)
    # 48-59 outer lip, 60-67 inner lip
    theta = np.deg2rad(180.0 - 30.0 * np.arange(12))
    pts[48:60, 0] = 0.32 * np.cos(theta)
    pts[48:60, 1] = 0.55 - 0.13 * np.sin(theta)
    theta = np.deg2rad(180.0 - 45.0 * np.arange(8))
    pts[60:68, 0] = 0.20 * np.cos(theta)
    pts[60:68, 1] = 0.55 - 0.055 * np.sin(theta)
    return pts


def _region_masks(x, y):
    """Boolean vertex masks for the four labeled parts, pairwise disjoint inner parts."""
    eyes = np.zeros_like(x, dtype=bool)
    for sign in (-1.0, 1.0):
        eyes |= ((x - sign * 0.40) / 0.24) ** 2 + ((y + 0.43) / 0.26) ** 2 <= 1.0
    half_width = 0.07 + 0.13 * (y + 0.45) / 0.75
    nose = (np.abs(x) <= half_width) & (y >= -0.45) & (y <= 0.30) & ~eyes
    mouth = ((x / 0.42) ** 2 + ((y - 0.55) / 0.24) ** 2 <= 1.0) & ~eyes & ~nose
    full = (x / _FACE_AX) ** 2 + (y / _FACE_AY) ** 2 <= 0.93**2
    full |= eyes | nose | mouth
    return {"eyes": eyes, "nose": nose, "mouth": mouth, "full": full}


def generate_synthetic_model(m: int, k: int, seed: int) -> MorphableModel:
    """Deterministic face-like test model: ellipsoidal dome with a nose bump.

    68 landmark vertices are snapped exactly onto the canonical layout and the
    four part regions are labeled geometrically.
    """
    model, _ = generate_synthetic_model_with_reference(m, k, seed)
    return model


def generate_synthetic_model_with_reference(m: int, k: int, seed: int):
    """Like generate_synthetic_model, but also returns recorded ground truth."""
    if m < 100:
        raise ValueError(f"m = {m} too small to host {N_LANDMARKS} distinct landmarks")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)

    # Sunflower spiral fills the face ellipse evenly and deterministically.
    i = np.arange(m, dtype=np.float64)
    r = np.sqrt((i + 0.5) / m)
    theta = i * _GOLDEN_ANGLE
    x = _FACE_AX * r * np.cos(theta)
    y = _FACE_AY * r * np.sin(theta)

    # Snap one host vertex onto each canonical landmark position.
    canon = _canonical_landmarks()
    hosts = np.full(N_LANDMARKS, -1, dtype=np.int64)
    taken = np.zeros(m, dtype=bool)
    for li in range(N_LANDMARKS):
        d2 = (x - canon[li, 0]) ** 2 + (y - canon[li, 1]) ** 2
        d2[taken] = np.inf
        hosts[li] = int(np.argmin(d2))
        taken[hosts[li]] = True
    x[hosts] = canon[:, 0]
    y[hosts] = canon[:, 1]
    z = _height_field(x, y)
    mean = np.column_stack([x, y, z])

    tri = Delaunay(np.column_stack([x, y])).simplices.astype(np.uint32)

    # Smooth bounded displacement fields, one direction per raw component.
    dictionary = np.zeros((k, m, 3))
    amps = rng.uniform(0.04, 0.10, size=k)
    for comp in range(k):
        w1, w2 = rng.uniform(1.4, 3.2, size=2)  # high enough that no component looks affine
        p1, p2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        field = np.sin(w1 * x + p1) * np.cos(w2 * y + p2)
        dictionary[comp] = field[:, None] * direction[None, :]
    if k <= 3 * N_LANDMARKS - 12:
        # Deflate each component's landmark footprint against rigid/affine
        # landmark motions (what the camera can express), then orthogonalize
        # the footprints. Camera and shape updates then act on near-orthogonal
        # directions and the alternating fit converges quickly.
        L = mean[hosts]
        affine_basis = []
        for row in range(3):
            for col in range(3):
                F = np.zeros((3, 3))
                F[row, col] = 1.0
                affine_basis.append((L @ F.T).reshape(-1))
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = 1.0
            affine_basis.append(np.tile(e, N_LANDMARKS))
        B = np.column_stack(affine_basis)  # (204, 12)
        B_pinv = np.linalg.pinv(B)
        lm_vals = dictionary[:, hosts, :].reshape(k, -1)
        deflated = lm_vals - (lm_vals @ B_pinv.T) @ B.T
        _, r_mat = np.linalg.qr(deflated.T)
        mixed = np.einsum("ij,imc->jmc", np.linalg.inv(r_mat), dictionary)
        # subtract each mixed component's landmark-affine part as a global
        # affine motion of all vertices, so the footprint at the landmarks is
        # exactly the deflated orthonormal one
        coeffs = mixed[:, hosts, :].reshape(k, -1) @ B_pinv.T  # (k, 12)
        verts_basis = []
        for row in range(3):
            for col in range(3):
                F = np.zeros((3, 3))
                F[row, col] = 1.0
                verts_basis.append((mean @ F.T).reshape(-1))
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = 1.0
            verts_basis.append(np.tile(e, m))
        Bv = np.column_stack(verts_basis)  # (3m, 12)
        dictionary = (mixed.reshape(k, -1) - coeffs @ Bv.T).reshape(k, m, 3)
    for comp in range(k):
        peak = np.abs(dictionary[comp]).max()
        dictionary[comp] *= amps[comp] / peak
    weights = rng.uniform(0.5, 2.0, size=k)

    masks = _region_masks(x, y)
    for li in hosts:  # landmark hosts always belong to the full-face region
        masks["full"][li] = True
    regions = {name: np.nonzero(mask)[0] for name, mask in masks.items()}

    model = MorphableModel(mean, dictionary, weights, hosts, regions, tri)

    region_tris = {}
    for name, mask in masks.items():
        inside = mask[tri]
        region_tris[name] = np.nonzero(inside.all(axis=1))[0]
    reference = SyntheticReference(
        landmark_points=mean[hosts].copy(), region_triangles=region_tris
    )
    return model, reference
