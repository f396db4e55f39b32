"""swap-eval: generate manifests and run the recognition-sensitivity protocol."""

from __future__ import annotations

import argparse
import os
import sys

from .corpus import load_corpus
from .embeddings import EmbedderUnavailable, get_embedder
from .manifest import SwapManifest, generate_manifest
from .protocol import ProtocolConfig, run_protocol


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="swap-eval",
        description="Measure how part swaps perturb face recognition, via the swap CLI.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_manifest = sub.add_parser("manifest", help="generate a swap manifest")
    p_manifest.add_argument("--corpus", required=True)
    p_manifest.add_argument("--mode", choices=("intra", "inter"), required=True)
    p_manifest.add_argument("--seed", type=int, default=0)
    p_manifest.add_argument("--max-pairs-per-identity", type=int, default=None)
    p_manifest.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run the full protocol and write a report")
    p_run.add_argument("--corpus", required=True)
    p_run.add_argument("--manifest", default=None, help="existing manifest JSON")
    p_run.add_argument("--mode", choices=("intra", "inter"), default="inter")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--backbones", default="pixel", help="comma list: mock, pixel, torchscript:<path>")
    p_run.add_argument("--cli", default="swap-batch", help="path to the primary swap-batch binary")
    p_run.add_argument("--workdir", default="swap-eval-work")
    p_run.add_argument("--out-dir", required=True)
    p_run.add_argument("--jobs", type=int, default=2)
    p_run.add_argument("--gamma", type=float, default=100.0)
    p_run.add_argument("--lambda", dest="lam", type=float, default=1e-6)
    p_run.add_argument("--iters", type=int, default=3)
    p_run.add_argument("--max-yaw", type=float, default=None)
    p_run.add_argument("--gallery-image", type=int, default=0)

    args = parser.parse_args(argv)
    if args.command == "manifest":
        corpus = load_corpus(args.corpus)
        manifest = generate_manifest(
            corpus, args.mode, args.seed, max_pairs_per_identity=args.max_pairs_per_identity
        )
        manifest.save(args.out)
        print(f"wrote {len(manifest.entries)} {args.mode} swap entries to {args.out}")
        return 0

    corpus = load_corpus(args.corpus)
    if args.manifest:
        manifest = SwapManifest.load(args.manifest)
    else:
        manifest = generate_manifest(corpus, args.mode, args.seed)
    backbones = []
    for spec in args.backbones.split(","):
        spec = spec.strip()
        if not spec:
            continue
        try:
            backbones.append(get_embedder(spec))
        except (EmbedderUnavailable, ValueError) as exc:
            print(f"swap-eval: backbone {spec!r} skipped: {exc}", file=sys.stderr)
    if not backbones:
        print("swap-eval: no usable backbone", file=sys.stderr)
        return 1
    config = ProtocolConfig(
        cli=args.cli,
        jobs=args.jobs,
        gamma=args.gamma,
        lam=args.lam,
        iters=args.iters,
        max_yaw_deg=args.max_yaw,
        gallery_image=args.gallery_image,
    )
    report = run_protocol(corpus, manifest, backbones, config, workdir=args.workdir)
    os.makedirs(args.out_dir, exist_ok=True)
    report.to_json(os.path.join(args.out_dir, "report.json"))
    markdown = report.render_markdown()
    with open(os.path.join(args.out_dir, "report.md"), "w") as fh:
        fh.write(markdown)
    report.save_plots(args.out_dir)
    print(markdown)
    return 0


if __name__ == "__main__":
    sys.exit(main())
