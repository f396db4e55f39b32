"""Command-line entry points: swap, swap-batch, swap-synth.

Exit codes: 0 success, 3 nothing-swapped (no valid triangle pairs survived
filtering), 1 pipeline error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import batch, image_io
from .errors import PartSwapError
from .model_core import generate_synthetic_model, load_model, save_model
from .pipeline import SwapJob, run_swap
from .render import TextureParams, camera_for_pose, fit_pose_to_frame, render_face, rotation_ypr
from .seamless_blend import DEFAULT_TOL
from .shape_fit import FitParams

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOTHING_SWAPPED = 3


def _parts(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def swap_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swap", description="Swap face parts from a source photo into a target photo."
    )
    parser.add_argument("--model", required=True, help="morphable model file")
    parser.add_argument("--source", required=True, help="source image")
    parser.add_argument("--target", required=True, help="target image")
    parser.add_argument("--source-landmarks", required=True)
    parser.add_argument("--target-landmarks", required=True)
    parser.add_argument("--source-mask", default=None, help="8-bit validity mask")
    parser.add_argument("--target-mask", default=None)
    parser.add_argument(
        "--parts", required=True, type=_parts, help="comma list of eyes,nose,mouth, or full"
    )
    parser.add_argument("--lambda", dest="lam", type=float, default=0.05,
                        help="relative ridge regularization (default 0.05)")
    parser.add_argument("--iters", type=int, default=2, help="fit alternation rounds")
    parser.add_argument("--blend-tol", type=float, default=DEFAULT_TOL)
    parser.add_argument("--gamma", type=float, default=10.0, help="hidden-point-removal radius factor")
    parser.add_argument("--debug-dir", default=None)
    parser.add_argument("--stats-json", default=None, help="write fit/pair quality signals here")
    parser.add_argument("--output", required=True)
    args = parser.parse_args(argv)

    try:
        model = load_model(args.model)
        job = SwapJob(
            source=batch._load_bundle(args.source, args.source_landmarks, args.source_mask),
            target=batch._load_bundle(args.target, args.target_landmarks, args.target_mask),
            parts=args.parts,
            fit_params=FitParams(lam=args.lam, n_iterations=args.iters),
            blend_tol=args.blend_tol,
            gamma=args.gamma,
            debug_dir=args.debug_dir,
        )
        result = run_swap(model, job)
        image_io.save_image(result.image, args.output)
        if args.stats_json:
            with open(args.stats_json, "w") as fh:
                json.dump(batch.job_stats(result), fh, indent=2)
    except (PartSwapError, ValueError, OSError) as exc:
        print(f"swap: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if result.nothing_swapped:
        print("swap: nothing swapped (no valid triangle pairs)", file=sys.stderr)
        return EXIT_NOTHING_SWAPPED
    return EXIT_OK


def swap_batch_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swap-batch", description="Run a manifest of swap jobs, optionally in parallel."
    )
    parser.add_argument("--manifest", required=True, help="JSON manifest of jobs")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers")
    args = parser.parse_args(argv)

    try:
        results = batch.run_manifest(args.manifest, jobs=args.jobs)
    except (PartSwapError, ValueError, OSError) as exc:
        print(f"swap-batch: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    n_error = 0
    n_nothing = 0
    for index, status, message in results:
        line = f"job {index}: {status}"
        if message:
            line += f" ({message})"
        print(line)
        n_error += status == "error"
        n_nothing += status == "nothing-swapped"
    if n_error:
        return EXIT_ERROR
    if n_nothing:
        return EXIT_NOTHING_SWAPPED
    return EXIT_OK


# ---------------------------------------------------------------------------
# Synthetic desk corpus
# ---------------------------------------------------------------------------

def _identity_border_rgb(index: int, total: int) -> tuple:
    # evenly spaced hues, full saturation: a stable identity-coded frame color
    import colorsys

    r, g, b = colorsys.hsv_to_rgb(index / max(total, 1), 0.85, 0.9)
    return int(255 * r), int(255 * g), int(255 * b)


def swap_synth_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swap-synth",
        description="Generate a synthetic model and a rendered desk-scale corpus.",
    )
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--identities", type=int, default=4)
    parser.add_argument("--images-per-identity", type=int, default=2)
    parser.add_argument("--size", type=int, default=256, help="square image side in pixels")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--vertices", type=int, default=1800)
    parser.add_argument("--components", type=int, default=8)
    parser.add_argument("--yaw-max", type=float, default=12.0, help="degrees")
    parser.add_argument("--border", type=int, default=8, help="identity-coded frame width, px")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    model = generate_synthetic_model(args.vertices, args.components, args.seed)
    model_path = os.path.join(args.out_dir, "model.fpsm")
    save_model(model, model_path)

    size = (args.size, args.size)
    identities = []
    for i in range(args.identities):
        ident = f"id{i:02d}"
        ident_dir = os.path.join(args.out_dir, ident)
        os.makedirs(ident_dir, exist_ok=True)
        alpha = rng.normal(size=model.k) * 0.8 * model.reg_weights
        texture = TextureParams(
            base_rgb=tuple(rng.uniform((150, 110, 90), (215, 180, 150))),
            amplitude=float(rng.uniform(20, 45)),
            freq_x=float(rng.uniform(1.2, 3.2)),
            freq_y=float(rng.uniform(0.8, 2.4)),
            phase=float(rng.uniform(0, 2 * np.pi)),
        )
        border_rgb = _identity_border_rgb(i, args.identities)
        images = []
        for j in range(args.images_per_identity):
            yaw = np.deg2rad(rng.uniform(-args.yaw_max, args.yaw_max))
            pitch = np.deg2rad(rng.uniform(-0.6 * args.yaw_max, 0.6 * args.yaw_max))
            roll = np.deg2rad(rng.uniform(-4.0, 4.0))
            rotation = rotation_ypr(yaw, pitch, roll)
            scale, translation = fit_pose_to_frame(model, rotation, size, fill=rng.uniform(0.6, 0.72))
            camera = camera_for_pose(rotation, scale, translation)
            image, landmarks, coverage = render_face(model, alpha, camera, size, texture)
            b = args.border
            if b > 0:
                image[:b, :] = border_rgb
                image[-b:, :] = border_rgb
                image[:, :b] = border_rgb
                image[:, -b:] = border_rgb
            stem = os.path.join(ident_dir, f"img{j}")
            image_io.save_image(image, stem + ".png")
            image_io.save_landmarks(landmarks, stem + "_landmarks.txt")
            image_io.save_image((coverage * np.uint8(255)), stem + "_mask.png")
            images.append(
                {
                    "image": os.path.relpath(stem + ".png", args.out_dir),
                    "landmarks": os.path.relpath(stem + "_landmarks.txt", args.out_dir),
                    "mask": os.path.relpath(stem + "_mask.png", args.out_dir),
                }
            )
        identities.append(
            {
                "id": ident,
                "gender": "m" if i % 2 else "f",
                "border_rgb": list(border_rgb),
                "images": images,
            }
        )
    corpus = {"seed": args.seed, "model": "model.fpsm", "identities": identities}
    with open(os.path.join(args.out_dir, "corpus.json"), "w") as fh:
        json.dump(corpus, fh, indent=2)
    print(f"wrote {args.identities} identities x {args.images_per_identity} images to {args.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(swap_main())
