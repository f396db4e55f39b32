import shutil
import subprocess

import pytest

from recog_harness.corpus import load_corpus

SWAP_SYNTH = shutil.which("swap-synth")
SWAP_BATCH = shutil.which("swap-batch")

needs_primary = pytest.mark.skipif(
    SWAP_SYNTH is None or SWAP_BATCH is None,
    reason="primary partswap CLI not on PATH (pip install the partswap package)",
)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    if SWAP_SYNTH is None:
        pytest.skip("swap-synth not on PATH")
    out = tmp_path_factory.mktemp("synth-corpus")
    subprocess.run(
        [
            SWAP_SYNTH,
            "--out-dir", str(out),
            "--identities", "4",
            "--images-per-identity", "2",
            "--size", "160",
            "--seed", "5",
            "--vertices", "1500",
            "--components", "6",
        ],
        check=True,
        capture_output=True,
    )
    return out


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    return load_corpus(corpus_dir)
