"""Identity corpus: a directory of per-identity face images with landmarks.

Layout (all paths in corpus.json are relative to the corpus root):

    corpus/
      corpus.json
      <identity>/<image>.png
      <identity>/<image>_landmarks.txt
      <identity>/<image>_mask.png        (optional per image)

corpus.json:

    {
      "model": "model.fpsm",             (optional: morphable model to fit with)
      "identities": [
        {"id": "id00", "gender": "f",
         "images": [{"image": "...", "landmarks": "...", "mask": "..."}]}
      ]
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class ImageRecord:
    image: str
    landmarks: str
    mask: str = None  # absent -> all-valid


@dataclass(frozen=True)
class Identity:
    id: str
    gender: str  # "m" | "f"
    images: tuple  # of ImageRecord


@dataclass(frozen=True)
class IdentityCorpus:
    root: str
    identities: tuple  # of Identity
    model: str = None

    def identity(self, ident_id: str) -> Identity:
        for ident in self.identities:
            if ident.id == ident_id:
                return ident
        raise KeyError(ident_id)

    @property
    def ids(self):
        return [ident.id for ident in self.identities]


def load_corpus(root) -> IdentityCorpus:
    """Read and validate corpus.json; paths are resolved against the root."""
    root = os.path.abspath(root)
    path = os.path.join(root, "corpus.json")
    with open(path) as fh:
        doc = json.load(fh)
    if "identities" not in doc or not isinstance(doc["identities"], list):
        raise ValueError(f"{path}: missing 'identities' list")

    def resolve(rel):
        if rel is None:
            return None
        full = rel if os.path.isabs(rel) else os.path.join(root, rel)
        if not os.path.exists(full):
            raise ValueError(f"{path}: referenced file missing: {rel}")
        return full

    identities = []
    for entry in doc["identities"]:
        gender = entry.get("gender", "")
        if gender not in ("m", "f"):
            raise ValueError(f"identity {entry.get('id')!r}: gender must be 'm' or 'f'")
        images = tuple(
            ImageRecord(
                image=resolve(img["image"]),
                landmarks=resolve(img["landmarks"]),
                mask=resolve(img.get("mask")),
            )
            for img in entry["images"]
        )
        if not images:
            raise ValueError(f"identity {entry.get('id')!r} has no images")
        identities.append(Identity(id=str(entry["id"]), gender=gender, images=images))
    if len(identities) < 2:
        raise ValueError("corpus needs at least 2 identities")
    if len({ident.id for ident in identities}) != len(identities):
        raise ValueError("duplicate identity ids")
    model = doc.get("model")
    return IdentityCorpus(
        root=root,
        identities=tuple(identities),
        model=resolve(model) if model else None,
    )
