"""Protocol driver: run all swap conditions through the primary CLI and score.

Swapped probe images are produced by `swap-batch`; descriptors come from the
configured backbones; scores are source/target attribution per condition,
both against per-identity classifier prototypes (closed set) and as Rank@1
gallery-vs-probe identification.
"""

from __future__ import annotations

import json
import logging
import os
import subprocess
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .corpus import IdentityCorpus
from .embeddings import EmbedderUnavailable
from .identify import cosine_matrix, rank1_identify
from .manifest import SwapManifest
from .report import CONDITIONS, EvalReport, attribution_cell

logger = logging.getLogger(__name__)

SWAP_CONDITIONS = ("full", "eyes", "nose", "mouth")
PART_ARGS = {"full": ["full"], "eyes": ["eyes"], "nose": ["nose"], "mouth": ["mouth"]}


@dataclass(frozen=True)
class ProtocolConfig:
    cli: str = "swap-batch"  # primary batch executable
    jobs: int = 2
    gamma: float = 100.0  # permissive visibility for desk-scale corpora
    lam: float = 1e-6
    iters: int = 3
    blend_tol: float = 1e-6
    max_yaw_deg: float = None  # exclude entries whose fitted |yaw| exceeds this
    gallery_image: int = 0  # which image of each identity composes the gallery


def _load_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _load_landmarks(path) -> np.ndarray:
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                x, y = line.split()
                pts.append((float(x), float(y)))
    return np.asarray(pts, dtype=np.float64)


def run_swaps(corpus: IdentityCorpus, manifest: SwapManifest, config: ProtocolConfig, workdir):
    """Execute every (condition, entry) swap via the primary CLI.

    Returns (outputs, stats, failures): output image path and stats dict per
    (condition, entry-index) key, and a failure count per condition.
    """
    if corpus.model is None:
        raise ValueError("corpus declares no morphable model; cannot run swaps")
    # absolute: job paths land in the batch manifest, which resolves relative
    # paths against its own directory, not our cwd
    workdir = os.path.abspath(workdir)
    os.makedirs(workdir, exist_ok=True)
    jobs = []
    keys = []
    for cond in SWAP_CONDITIONS:
        cond_dir = os.path.join(workdir, cond)
        os.makedirs(cond_dir, exist_ok=True)
        for idx, entry in enumerate(manifest.entries):
            src = corpus.identity(entry.source_id).images[entry.source_image]
            dst = corpus.identity(entry.target_id).images[entry.target_image]
            stem = os.path.join(cond_dir, f"probe{idx:04d}")
            jobs.append(
                {
                    "source": src.image,
                    "target": dst.image,
                    "source_landmarks": src.landmarks,
                    "target_landmarks": dst.landmarks,
                    "source_mask": src.mask,
                    "target_mask": dst.mask,
                    "parts": PART_ARGS[cond],
                    "output": stem + ".png",
                    "stats": stem + ".json",
                }
            )
            keys.append((cond, idx))

    outputs = {}
    stats = {}
    failures = {cond: 0 for cond in SWAP_CONDITIONS}
    if jobs:
        batch = {
            "model": corpus.model,
            "defaults": {
                "lambda": config.lam,
                "iters": config.iters,
                "blend_tol": config.blend_tol,
                "gamma": config.gamma,
            },
            "jobs": jobs,
        }
        mpath = os.path.join(workdir, "swap_batch_manifest.json")
        with open(mpath, "w") as fh:
            json.dump(batch, fh)
        proc = subprocess.run(
            [config.cli, "--manifest", mpath, "--jobs", str(config.jobs)],
            capture_output=True,
            text=True,
        )
        if proc.returncode not in (0, 3):
            logger.warning("swap-batch exited %d: %s", proc.returncode, proc.stderr.strip())
        for (cond, idx), job in zip(keys, jobs):
            try:
                with open(job["stats"]) as fh:
                    job_stats = json.load(fh)
            except OSError:
                failures[cond] += 1
                logger.warning("swap failed: condition=%s entry=%d", cond, idx)
                continue
            if job_stats.get("status") != "swapped":
                failures[cond] += 1
                continue
            outputs[(cond, idx)] = job["output"]
            stats[(cond, idx)] = job_stats
    return outputs, stats, failures


def _yaw_excluded(stats, idx, max_yaw) -> bool:
    if max_yaw is None:
        return False
    for cond in SWAP_CONDITIONS:
        js = stats.get((cond, idx))
        if js is None:
            continue
        for side in ("source", "target"):
            if abs(js[side]["yaw_deg"]) > max_yaw:
                return True
        return False
    return False


def run_protocol(
    corpus: IdentityCorpus,
    manifest: SwapManifest,
    backbones: list,
    config: ProtocolConfig = ProtocolConfig(),
    workdir: str = "swap-eval-work",
) -> EvalReport:
    """Execute the full evaluation and assemble the report."""
    outputs, stats, swap_failures = run_swaps(corpus, manifest, config, workdir)

    excluded_yaw = {
        idx
        for idx in range(len(manifest.entries))
        if _yaw_excluded(stats, idx, config.max_yaw_deg)
    }

    ident_order = corpus.ids
    classification = {}
    rank1 = {}
    crop_info = {}
    embed_failures = 0
    skipped_backbones = []
    for backbone in backbones:
        crop_info[backbone.name] = backbone.crop
        try:
            origs = {}  # (identity, image-index) -> descriptor
            for ident in corpus.identities:
                for j, rec in enumerate(ident.images):
                    origs[(ident.id, j)] = backbone.embed(
                        _load_image(rec.image), _load_landmarks(rec.landmarks)
                    )
        except EmbedderUnavailable as exc:
            logger.warning("backbone %s unavailable, row skipped: %s", backbone.name, exc)
            skipped_backbones.append(backbone.name)
            continue

        prototypes = []
        gallery = []
        for ident in corpus.identities:
            vecs = np.stack([origs[(ident.id, j)] for j in range(len(ident.images))])
            mean = vecs.mean(axis=0)
            prototypes.append(mean / np.linalg.norm(mean))
            gallery.append(origs[(ident.id, config.gallery_image)])
        prototypes = np.stack(prototypes)
        gallery = np.stack(gallery)

        probe_vectors = {}  # (condition, idx) -> descriptor
        for idx, entry in enumerate(manifest.entries):
            if idx in excluded_yaw:
                continue
            dst = corpus.identity(entry.target_id).images[entry.target_image]
            probe_vectors[("original", idx)] = origs[(entry.target_id, entry.target_image)]
            lm = _load_landmarks(dst.landmarks)
            for cond in SWAP_CONDITIONS:
                path = outputs.get((cond, idx))
                if path is None:
                    continue
                try:
                    probe_vectors[(cond, idx)] = backbone.embed(_load_image(path), lm)
                except Exception as exc:
                    embed_failures += 1
                    logger.warning("embed failed (%s, %d): %s", cond, idx, exc)

        by_cond = {}
        r1 = {}
        for cond in CONDITIONS:
            idxs = [
                i for i in range(len(manifest.entries)) if (cond, i) in probe_vectors
            ]
            sources = [manifest.entries[i].source_id for i in idxs]
            targets = [manifest.entries[i].target_id for i in idxs]
            if idxs:
                probes = np.stack([probe_vectors[(cond, i)] for i in idxs])
                sims = cosine_matrix(probes, prototypes)
                predicted = [ident_order[j] for j in sims.argmax(axis=1)]
                r1_pred = rank1_identify(probes, gallery, ident_order)
            else:
                predicted = []
                r1_pred = []

            splits = {"all": list(range(len(idxs)))}
            if manifest.mode == "inter":
                for tag in ("same", "diff"):
                    splits[tag] = [
                        p for p, i in enumerate(idxs)
                        if manifest.entries[i].gender_pairing == tag
                    ]
            else:  # supplementary: split intra results by subject gender
                for tag in ("m", "f"):
                    splits[tag] = [
                        p for p, i in enumerate(idxs)
                        if corpus.identity(manifest.entries[i].source_id).gender == tag
                    ]
            by_cond[cond] = {
                split: attribution_cell(
                    [predicted[p] for p in members],
                    [sources[p] for p in members],
                    [targets[p] for p in members],
                )
                for split, members in splits.items()
            }
            r1[cond] = attribution_cell(r1_pred, sources, targets)
        classification[backbone.name] = by_cond
        rank1[backbone.name] = r1

    report = EvalReport(
        mode=manifest.mode,
        backbones=tuple(b.name for b in backbones if b.name not in skipped_backbones),
        crop_info=crop_info,
        classification=classification,
        rank1=rank1,
        exclusions={
            "swap_failures": swap_failures,
            "max_yaw_excluded_entries": len(excluded_yaw),
            "embed_failures": embed_failures,
            "skipped_backbones": skipped_backbones,
        },
        meta={
            "seed": manifest.seed,
            "n_entries": len(manifest.entries),
            "cli": config.cli,
            "gamma": config.gamma,
            "lambda": config.lam,
            "iters": config.iters,
            "max_yaw_deg": config.max_yaw_deg,
            "gallery_image_index": config.gallery_image,
        },
    )
    report.validate()
    return report
