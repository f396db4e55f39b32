#!/usr/bin/env python3
"""Build a desk-scale LFW corpus for swap-eval.

Requirements (one-time, network access needed):
  * scikit-learn (downloads the LFW archive on first use)
  * face-alignment (pip install face-alignment; downloads detector weights)
  * a morphable-model file for the fitter (--model)

LFW ships no gender labels; pass --genders CSV ("name,m|f") for meaningful
same/different-gender splits, or --assume-alternating to label identities
alternately (the split then carries no real meaning and is marked as such).

Example:
  python build_lfw_corpus.py --out-dir lfw-corpus --identities 10 \
      --images-per-identity 4 --model model.fpsm --genders genders.csv
"""

import argparse
import csv
import json
import os
import shutil
import sys

import numpy as np
from PIL import Image


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--identities", type=int, default=10)
    parser.add_argument("--images-per-identity", type=int, default=4)
    parser.add_argument("--model", required=True, help="morphable model file to reference")
    parser.add_argument("--genders", default=None, help="CSV of 'identity name,m|f'")
    parser.add_argument("--assume-alternating", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    try:
        from sklearn.datasets import fetch_lfw_people
    except ImportError:
        print("scikit-learn is required (pip install scikit-learn)", file=sys.stderr)
        return 1
    try:
        import face_alignment
    except ImportError:
        print("face-alignment is required (pip install face-alignment)", file=sys.stderr)
        return 1

    genders = {}
    if args.genders:
        with open(args.genders) as fh:
            for name, g in csv.reader(fh):
                genders[name.strip()] = g.strip()
    elif not args.assume_alternating:
        print("pass --genders CSV or --assume-alternating", file=sys.stderr)
        return 1

    print("fetching LFW (this downloads ~on first use)...")
    lfw = fetch_lfw_people(
        min_faces_per_person=args.images_per_identity, color=True, resize=1.0
    )
    rng = np.random.default_rng(args.seed)
    names = list(lfw.target_names)
    order = rng.permutation(len(names))

    detector = face_alignment.FaceAlignment(
        face_alignment.LandmarksType.TWO_D, flip_input=False, device="cpu"
    )

    os.makedirs(args.out_dir, exist_ok=True)
    shutil.copy(args.model, os.path.join(args.out_dir, os.path.basename(args.model)))
    identities = []
    for pos in order:
        if len(identities) >= args.identities:
            break
        name = names[pos]
        indices = np.nonzero(lfw.target == pos)[0][: args.images_per_identity]
        if len(indices) < args.images_per_identity:
            continue
        ident_id = name.replace(" ", "_")
        gender = genders.get(name, "m" if len(identities) % 2 else "f")
        ident_dir = os.path.join(args.out_dir, ident_id)
        os.makedirs(ident_dir, exist_ok=True)
        images = []
        for j, img_idx in enumerate(indices):
            arr = (lfw.images[img_idx] * 255.0).astype(np.uint8)
            preds = detector.get_landmarks(arr)
            if not preds:
                print(f"  no landmarks for {name} image {j}, skipping image")
                continue
            stem = os.path.join(ident_dir, f"img{j}")
            Image.fromarray(arr).save(stem + ".png")
            with open(stem + "_landmarks.txt", "w") as fh:
                for x, y in preds[0]:
                    fh.write(f"{x:.3f} {y:.3f}\n")
            images.append(
                {
                    "image": os.path.relpath(stem + ".png", args.out_dir),
                    "landmarks": os.path.relpath(stem + "_landmarks.txt", args.out_dir),
                }
            )
        if len(images) >= args.images_per_identity:
            identities.append({"id": ident_id, "gender": gender, "images": images})
        else:
            shutil.rmtree(ident_dir, ignore_errors=True)

    if len(identities) < args.identities:
        print(f"only collected {len(identities)} identities", file=sys.stderr)
    corpus = {
        "model": os.path.basename(args.model),
        "identities": identities,
        "note": "genders assumed alternating" if not args.genders else "genders from CSV",
    }
    with open(os.path.join(args.out_dir, "corpus.json"), "w") as fh:
        json.dump(corpus, fh, indent=2)
    print(f"wrote {len(identities)} identities to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
