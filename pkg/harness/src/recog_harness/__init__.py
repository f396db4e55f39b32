"""Recognition-sensitivity evaluation harness for the part-swapping CLI."""

from .corpus import IdentityCorpus, Identity, ImageRecord, load_corpus
from .embeddings import (
    EmbedderUnavailable,
    MockBorderEmbedder,
    PixelEmbedder,
    TorchScriptEmbedder,
    crop_face,
    get_embedder,
)
from .identify import cosine_matrix, rank1_identify
from .manifest import SwapEntry, SwapManifest, generate_manifest
from .protocol import ProtocolConfig, run_protocol, run_swaps
from .report import CONDITIONS, EvalReport, attribution_cell

__version__ = "0.1.0"
