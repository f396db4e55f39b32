import numpy as np
import pytest
from PIL import Image

from recog_harness.embeddings import MockBorderEmbedder, PixelEmbedder, crop_face, get_embedder
from recog_harness.identify import cosine_matrix, rank1_identify
from conftest import needs_primary


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestRank1:
    def test_self_match(self):
        gallery = np.stack([unit([1, 0, 0]), unit([0, 1, 0]), unit([0, 0, 1])])
        ids = ["a", "b", "c"]
        assert rank1_identify(gallery[1], gallery, ids) == ["b"]

    def test_forced_argmax(self):
        gallery = np.stack([unit([1, 0, 0, 0]), unit([0, 1, 0, 0]), unit([0, 0, 1, 0])])
        probe = unit([0, 0, 0.3, 1.0])  # orthogonal to all but the third
        assert rank1_identify(probe, gallery, ["a", "b", "c"]) == ["c"]

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(0)
        gallery = np.stack([unit(rng.normal(size=8)) for _ in range(3)])
        ids = ["x", "y", "z"]
        probes = np.stack([unit(rng.normal(size=8)) for _ in range(40)])
        predicted = rank1_identify(probes, gallery, ids)
        for p, pred in zip(probes, predicted):
            sims = [float(p @ g) for g in gallery]
            assert pred == ids[int(np.argmax(sims))]

    def test_tie_breaks_to_lowest_index(self):
        g = unit([1, 1, 0])
        gallery = np.stack([g, g, unit([0, 0, 1])])
        assert rank1_identify(g, gallery, ["a", "b", "c"]) == ["a"]

    def test_needs_two_identities(self):
        with pytest.raises(ValueError):
            rank1_identify(unit([1, 0]), np.stack([unit([1, 0])]), ["a"])

    def test_cosine_matrix_shape(self):
        a = np.stack([unit([1, 0]), unit([0, 1])])
        b = np.stack([unit([1, 1]), unit([1, -1]), unit([0, 1])])
        assert cosine_matrix(a, b).shape == (2, 3)


def framed_image(border_rgb, inner=96, border=8):
    img = np.full((inner, inner, 3), 120, dtype=np.uint8)
    img[:border] = border_rgb
    img[-border:] = border_rgb
    img[:, :border] = border_rgb
    img[:, -border:] = border_rgb
    return img


class TestEmbedders:
    def test_mock_is_identity_coded(self):
        emb = MockBorderEmbedder()
        a1 = emb.embed(framed_image((220, 30, 30)))
        a2 = emb.embed(framed_image((220, 30, 30)))
        b = emb.embed(framed_image((30, 220, 30)))
        np.testing.assert_array_equal(a1, a2)
        assert a1 @ b < a1 @ a2 - 1e-3

    def test_norm_contract(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(120, 120, 3)).astype(np.uint8)
        lm = rng.uniform(20, 100, size=(68, 2))
        for emb in (MockBorderEmbedder(), PixelEmbedder()):
            v = emb.embed(img, lm)
            assert abs(np.linalg.norm(v) - 1.0) <= 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, size=(100, 100, 3)).astype(np.uint8)
        lm = rng.uniform(10, 90, size=(68, 2))
        emb = PixelEmbedder()
        np.testing.assert_array_equal(emb.embed(img, lm), emb.embed(img, lm))

    def test_crop_face_bounds(self):
        img = np.zeros((50, 80, 3), dtype=np.uint8)
        lm = np.array([[10.0, 12.0], [40.0, 30.0]] * 34)
        patch = crop_face(img, lm, margin=0.5)
        assert patch.shape[0] <= 50 and patch.shape[1] <= 80
        assert patch.size > 0

    def test_registry(self):
        assert get_embedder("mock").name == "mock"
        assert get_embedder("pixel").name == "pixel"
        with pytest.raises(ValueError):
            get_embedder("resnet5000")

    @needs_primary
    def test_pixel_within_identity_closer(self, corpus):
        emb = PixelEmbedder()
        vecs = {}
        for ident in corpus.identities[:2]:
            for j, rec in enumerate(ident.images):
                with Image.open(rec.image) as img:
                    arr = np.asarray(img.convert("RGB"))
                lm = np.loadtxt(rec.landmarks)
                vecs[(ident.id, j)] = emb.embed(arr, lm)
        a, b = corpus.identities[0].id, corpus.identities[1].id
        within = vecs[(a, 0)] @ vecs[(a, 1)]
        cross = vecs[(a, 0)] @ vecs[(b, 0)]
        assert within > cross
