"""Swap manifests: which image goes onto which, intra- or inter-subject."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import IdentityCorpus

MODES = ("intra", "inter")


@dataclass(frozen=True)
class SwapEntry:
    source_id: str
    source_image: int  # index into the identity's image list
    target_id: str
    target_image: int
    gender_pairing: str  # "same" | "diff"


@dataclass(frozen=True)
class SwapManifest:
    mode: str
    seed: int
    entries: tuple  # of SwapEntry

    def save(self, path):
        doc = {
            "mode": self.mode,
            "seed": self.seed,
            "entries": [asdict(e) for e in self.entries],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)

    @classmethod
    def load(cls, path) -> "SwapManifest":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(
            mode=doc["mode"],
            seed=int(doc["seed"]),
            entries=tuple(SwapEntry(**e) for e in doc["entries"]),
        )


def generate_manifest(
    corpus: IdentityCorpus,
    mode: str,
    seed: int,
    max_pairs_per_identity: int = None,
) -> SwapManifest:
    """Build a deterministic swap manifest.

    intra: every ordered pair of images within each identity (optionally
    capped per identity). inter: each identity becomes a source once, paired
    with a random other identity; same-/different-gender pairings are kept
    balanced (counts differ by at most one when genders allow); image i of
    the source maps onto image i of the target.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = np.random.default_rng(seed)
    entries = []
    if mode == "intra":
        eligible = [ident for ident in corpus.identities if len(ident.images) >= 2]
        if not eligible:
            raise ValueError("intra mode needs an identity with at least 2 images")
        for ident in corpus.identities:
            n = len(ident.images)
            pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
            if max_pairs_per_identity is not None and len(pairs) > max_pairs_per_identity:
                keep = rng.choice(len(pairs), size=max_pairs_per_identity, replace=False)
                pairs = [pairs[i] for i in sorted(keep)]
            for i, j in pairs:
                entries.append(
                    SwapEntry(ident.id, i, ident.id, j, gender_pairing="same")
                )
    else:
        if len(corpus.identities) < 2:
            raise ValueError("inter mode needs at least 2 identities")
        order = list(rng.permutation(len(corpus.identities)))
        counts = {"same": 0, "diff": 0}
        for idx in order:
            source = corpus.identities[idx]
            same_pool = [
                i for i in corpus.identities
                if i.id != source.id and i.gender == source.gender
            ]
            diff_pool = [
                i for i in corpus.identities
                if i.id != source.id and i.gender != source.gender
            ]
            if counts["same"] <= counts["diff"] and same_pool:
                pairing, pool = "same", same_pool
            elif diff_pool:
                pairing, pool = "diff", diff_pool
            else:
                pairing, pool = "same", same_pool
            target = pool[int(rng.integers(len(pool)))]
            counts[pairing] += 1
            n = min(len(source.images), len(target.images))
            for i in range(n):
                entries.append(SwapEntry(source.id, i, target.id, i, pairing))
    return SwapManifest(mode=mode, seed=seed, entries=tuple(entries))
