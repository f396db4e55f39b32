"""Manifest-driven batch execution of swap jobs.

The manifest is a JSON document; relative paths resolve against its location:

    {
      "model": "model.fpsm",
      "defaults": {"parts": ["nose"], "lambda": 0.05, "iters": 2,
                   "blend_tol": 1e-6, "gamma": 10.0},
      "jobs": [
        {"source": "a.png", "target": "b.png",
         "source_landmarks": "a.txt", "target_landmarks": "b.txt",
         "source_mask": null, "target_mask": null,
         "parts": ["eyes"], "output": "out.png",
         "stats": null, "debug_dir": null}
      ]
    }
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import image_io
from .model_core import MorphableModel, load_model
from .pipeline import ImageBundle, SwapJob, SwapResult, run_swap
from .render import yaw_pitch_roll
from .seamless_blend import DEFAULT_TOL
from .shape_fit import FitParams


@dataclass(frozen=True)
class JobSpec:
    """File-level description of one swap, as read from a manifest."""

    source: str
    target: str
    source_landmarks: str
    target_landmarks: str
    parts: tuple
    output: str
    source_mask: str = None
    target_mask: str = None
    lam: float = 0.05
    iters: int = 2
    blend_tol: float = DEFAULT_TOL
    gamma: float = 10.0
    stats: str = None
    debug_dir: str = None


def load_manifest(path):
    """Parse a manifest file into (model_path, [JobSpec])."""
    with open(path) as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        if p is None:
            return None
        return p if os.path.isabs(p) else os.path.join(base, p)

    if "model" not in doc:
        raise ValueError("manifest missing 'model'")
    if "jobs" not in doc or not isinstance(doc["jobs"], list):
        raise ValueError("manifest missing 'jobs' list")
    defaults = doc.get("defaults", {})
    specs = []
    for i, job in enumerate(doc["jobs"]):
        merged = {**defaults, **job}
        try:
            specs.append(
                JobSpec(
                    source=resolve(merged["source"]),
                    target=resolve(merged["target"]),
                    source_landmarks=resolve(merged["source_landmarks"]),
                    target_landmarks=resolve(merged["target_landmarks"]),
                    parts=tuple(merged["parts"]),
                    output=resolve(merged["output"]),
                    source_mask=resolve(merged.get("source_mask")),
                    target_mask=resolve(merged.get("target_mask")),
                    lam=float(merged.get("lambda", 0.05)),
                    iters=int(merged.get("iters", 2)),
                    blend_tol=float(merged.get("blend_tol", DEFAULT_TOL)),
                    gamma=float(merged.get("gamma", 10.0)),
                    stats=resolve(merged.get("stats")),
                    debug_dir=resolve(merged.get("debug_dir")),
                )
            )
        except KeyError as exc:
            raise ValueError(f"manifest job {i} missing field {exc}") from exc
    return resolve(doc["model"]), specs


def _load_bundle(image_path, landmarks_path, mask_path) -> ImageBundle:
    image = image_io.load_image(image_path)
    landmarks = image_io.load_landmarks(landmarks_path)
    mask = image_io.load_mask(mask_path) if mask_path else None
    return ImageBundle(image, landmarks, mask)


def job_stats(result: SwapResult) -> dict:
    """Quality signals for one executed job (the JSON stats payload)."""
    stats = {
        "status": result.status.value,
        "pair_count": result.pair_count,
        "valid_pair_fraction": result.valid_pair_fraction,
    }
    for tag, fit in (("source", result.fit_src), ("target", result.fit_dst)):
        if fit is None:
            continue
        yaw, pitch, roll = yaw_pitch_roll(fit.rotation.R)
        stats[tag] = {
            "landmark_residual_px": fit.landmark_residual,
            "yaw_deg": float(np.degrees(yaw)),
            "pitch_deg": float(np.degrees(pitch)),
            "roll_deg": float(np.degrees(roll)),
        }
    return stats


def execute_spec(model: MorphableModel, spec: JobSpec) -> SwapResult:
    """Load a spec's files, run the swap, and write its outputs."""
    job = SwapJob(
        source=_load_bundle(spec.source, spec.source_landmarks, spec.source_mask),
        target=_load_bundle(spec.target, spec.target_landmarks, spec.target_mask),
        parts=spec.parts,
        fit_params=FitParams(lam=spec.lam, n_iterations=spec.iters),
        blend_tol=spec.blend_tol,
        gamma=spec.gamma,
        debug_dir=spec.debug_dir,
    )
    result = run_swap(model, job)
    out_dir = os.path.dirname(spec.output)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    image_io.save_image(result.image, spec.output)
    if spec.stats:
        with open(spec.stats, "w") as fh:
            json.dump(job_stats(result), fh, indent=2)
    return result


_WORKER_MODEL = None


def _init_worker(model_path):
    global _WORKER_MODEL
    _WORKER_MODEL = load_model(model_path)


def _run_worker(args):
    index, spec = args
    try:
        result = execute_spec(_WORKER_MODEL, spec)
        return index, result.status.value, None
    except Exception as exc:  # report, don't kill the pool
        return index, "error", f"{type(exc).__name__}: {exc}"


def run_manifest(manifest_path, jobs: int = 1):
    """Run every manifest job, `jobs` at a time.

    Returns a list of (index, status, error-or-None) ordered by job index.
    """
    model_path, specs = load_manifest(manifest_path)
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    tasks = list(enumerate(specs))
    if jobs == 1 or len(specs) <= 1:
        _init_worker(model_path)
        results = [_run_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(model_path,)
        ) as pool:
            results = list(pool.map(_run_worker, tasks))
    return sorted(results, key=lambda r: r[0])
