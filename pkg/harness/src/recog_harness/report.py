"""Evaluation report: per-condition attribution tables, serialization, plots."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CONDITIONS = ("original", "full", "eyes", "nose", "mouth")


def attribution_cell(predictions, source_ids, target_ids) -> dict:
    """Source/target attribution percentages for one (condition, split) cell."""
    n = len(predictions)
    if n == 0:
        return {"source_pct": None, "target_pct": None, "n": 0}
    hits_src = sum(p == s for p, s in zip(predictions, source_ids))
    hits_tgt = sum(p == t for p, t in zip(predictions, target_ids))
    return {
        "source_pct": 100.0 * hits_src / n,
        "target_pct": 100.0 * hits_tgt / n,
        "n": n,
    }


@dataclass
class EvalReport:
    mode: str  # "intra" | "inter"
    backbones: tuple
    crop_info: dict
    # backbone -> condition -> split -> {"source_pct", "target_pct", "n"}
    classification: dict
    # backbone -> condition -> {"source_pct", "target_pct", "n"}
    rank1: dict
    exclusions: dict
    meta: dict
    conditions: tuple = CONDITIONS

    def validate(self):
        """Cell sanity: attribution percentages can never sum past 100."""
        problems = []
        for backbone, by_cond in self.classification.items():
            for cond, by_split in by_cond.items():
                for split, cell in by_split.items():
                    if cell["n"] and self.mode == "inter":
                        total = cell["source_pct"] + cell["target_pct"]
                        if total > 100.0 + 1e-9:
                            problems.append(
                                f"{backbone}/{cond}/{split}: source+target = {total:.2f}%"
                            )
        if problems:
            raise ValueError("report integrity violated: " + "; ".join(problems))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    @classmethod
    def from_json(cls, path) -> "EvalReport":
        with open(path) as fh:
            doc = json.load(fh)
        doc["backbones"] = tuple(doc["backbones"])
        doc["conditions"] = tuple(doc["conditions"])
        return cls(**doc)

    # -- rendering ----------------------------------------------------------

    def _fmt(self, value):
        return "-" if value is None else f"{value:.2f}%"

    def render_markdown(self) -> str:
        lines = [f"# {self.mode}-subject swap evaluation", ""]
        lines.append(f"Exclusions: {json.dumps(self.exclusions)}")
        lines.append("")
        for backbone in self.backbones:
            lines.append(f"## Backbone: {backbone} (crop: {self.crop_info.get(backbone)})")
            lines.append("")
            lines.append("### Classification")
            header = "| split | attribution | " + " | ".join(self.conditions) + " |"
            lines.append(header)
            lines.append("|" + "---|" * (len(self.conditions) + 2))
            by_cond = self.classification[backbone]
            splits = sorted({s for cond in by_cond.values() for s in cond})
            splits = [s for s in ("same", "diff", "m", "f") if s in splits] + ["all"]
            for split in splits:
                label = split if split in ("same", "diff", "all") else f"{split} (supplementary)"
                for attr in ("source", "target"):
                    cells = [
                        self._fmt(by_cond[c][split][f"{attr}_pct"]) if split in by_cond[c] else "-"
                        for c in self.conditions
                    ]
                    lines.append(f"| {label} | {attr} | " + " | ".join(cells) + " |")
            lines.append("")
            lines.append("### Rank@1 (gallery vs probe)")
            lines.append("| attribution | " + " | ".join(self.conditions) + " |")
            lines.append("|" + "---|" * (len(self.conditions) + 1))
            for attr in ("source", "target"):
                cells = [
                    self._fmt(self.rank1[backbone][c][f"{attr}_pct"]) for c in self.conditions
                ]
                lines.append(f"| {attr} | " + " | ".join(cells) + " |")
            lines.append("")
        return "\n".join(lines)

    def save_plots(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for backbone in self.backbones:
            for title, table in (
                ("classification", {c: self.classification[backbone][c].get("all")
                                    for c in self.conditions}),
                ("rank1", self.rank1[backbone]),
            ):
                fig, ax = plt.subplots(figsize=(7, 4))
                x = np.arange(len(self.conditions))
                src = [table[c]["source_pct"] if table[c] and table[c]["source_pct"] is not None else 0.0
                       for c in self.conditions]
                tgt = [table[c]["target_pct"] if table[c] and table[c]["target_pct"] is not None else 0.0
                       for c in self.conditions]
                ax.bar(x - 0.2, src, width=0.4, label="source-attributed")
                ax.bar(x + 0.2, tgt, width=0.4, label="target-attributed")
                ax.set_xticks(x, self.conditions)
                ax.set_ylabel("%")
                ax.set_ylim(0, 105)
                ax.set_title(f"{self.mode}-subject, {backbone}, {title}")
                ax.legend()
                fig.tight_layout()
                safe = backbone.replace(":", "_").replace("/", "_")
                path = os.path.join(out_dir, f"{self.mode}_{safe}_{title}.png")
                fig.savefig(path, dpi=110)
                plt.close(fig)
                written.append(path)
        return written
