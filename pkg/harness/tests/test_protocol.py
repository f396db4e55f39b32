import pytest

from recog_harness.embeddings import MockBorderEmbedder
from recog_harness.manifest import SwapManifest, generate_manifest
from recog_harness.protocol import ProtocolConfig, run_protocol
from recog_harness.report import CONDITIONS
from conftest import SWAP_BATCH, needs_primary


@needs_primary
def test_empty_manifest_gives_empty_report(corpus, tmp_path):
    manifest = SwapManifest(mode="inter", seed=0, entries=())
    report = run_protocol(
        corpus,
        manifest,
        [MockBorderEmbedder()],
        ProtocolConfig(cli=SWAP_BATCH, jobs=1),
        workdir=str(tmp_path / "work"),
    )
    assert report.conditions == CONDITIONS
    assert report.backbones == ("mock",)
    for cond in CONDITIONS:
        assert report.rank1["mock"][cond]["n"] == 0
    markdown = report.render_markdown()
    for cond in CONDITIONS:
        assert cond in markdown


@pytest.fixture(scope="module")
def intra_report(corpus, tmp_path_factory):
    manifest = generate_manifest(corpus, "intra", seed=1)
    work = tmp_path_factory.mktemp("intra-work")
    return run_protocol(
        corpus,
        manifest,
        [MockBorderEmbedder()],
        ProtocolConfig(cli=SWAP_BATCH, jobs=4),
        workdir=str(work),
    )


@needs_primary
class TestFullRun:
    def test_mock_intra_perfect(self, intra_report):
        for cond in CONDITIONS:
            cell = intra_report.classification["mock"][cond]["all"]
            assert cell["n"] > 0
            assert cell["source_pct"] == 100.0
            assert cell["target_pct"] == 100.0
            r1 = intra_report.rank1["mock"][cond]
            assert r1["target_pct"] == 100.0

    def test_exclusion_counters_present(self, intra_report):
        ex = intra_report.exclusions
        assert set(ex) >= {"swap_failures", "max_yaw_excluded_entries", "embed_failures"}
        assert all(v == 0 for v in ex["swap_failures"].values())

    def test_supplementary_gender_split(self, intra_report):
        by_split = intra_report.classification["mock"]["nose"]
        assert "m" in by_split and "f" in by_split
        assert by_split["m"]["n"] + by_split["f"]["n"] == by_split["all"]["n"]

    def test_plots_and_markdown(self, intra_report, tmp_path):
        files = intra_report.save_plots(tmp_path / "plots")
        assert len(files) == 2  # classification + rank1 for the single backbone
        md = intra_report.render_markdown()
        assert "Rank@1" in md and "mock" in md

    def test_json_round_trip(self, intra_report, tmp_path):
        from recog_harness.report import EvalReport

        path = tmp_path / "report.json"
        intra_report.to_json(path)
        loaded = EvalReport.from_json(path)
        assert loaded.mode == intra_report.mode
        assert loaded.rank1.keys() == intra_report.rank1.keys()


@needs_primary
def test_relative_workdir(corpus, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    manifest = generate_manifest(corpus, "intra", seed=3, max_pairs_per_identity=1)
    report = run_protocol(
        corpus,
        manifest,
        [MockBorderEmbedder()],
        ProtocolConfig(cli=SWAP_BATCH, jobs=2),
        workdir="relative-work",
    )
    assert all(v == 0 for v in report.exclusions["swap_failures"].values())
    assert report.rank1["mock"]["nose"]["n"] == len(manifest.entries)


@needs_primary
def test_max_yaw_excludes_everything(corpus, tmp_path):
    manifest = generate_manifest(corpus, "intra", seed=1)
    report = run_protocol(
        corpus,
        manifest,
        [MockBorderEmbedder()],
        ProtocolConfig(cli=SWAP_BATCH, jobs=4, max_yaw_deg=0.01),
        workdir=str(tmp_path / "work"),
    )
    assert report.exclusions["max_yaw_excluded_entries"] == len(manifest.entries)
    for cond in CONDITIONS:
        assert report.rank1["mock"][cond]["n"] == 0
