"""Tests for agent-05-training — embedding export, consistency statistics and attention heatmaps."""

import numpy as np
import pytest
from PIL import Image

from agent_01_taxonomy.algorithms.tree import TaxonomyError, build_tree
from agent_02_data_pipeline.src.dataset import DatasetError, load_dataset
from agent_03_model.src.checkpoint import CheckpointError
from agent_03_model.src.encoder import ShapeError
from agent_04_synthetic_data.src.generator import generate
from agent_05_training.src.consistency import hierarchy_consistency_stat
from agent_05_training.src.exports import (
    ATTENTION_ARCHIVE,
    attention_heatmap,
    export_attention,
    export_embeddings,
    overlay_heatmap,
    read_embeddings,
)
from agent_05_training.src.trainer import train
from tests.factories import (
    SMALL_TAXONOMY,
    balanced_tree_records,
    tiny_synthetic_spec,
    tiny_train_config,
    write_annotation_file,
)


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    run = generate(tiny_synthetic_spec(test_samples=24), tmp_path_factory.mktemp("synth"))
    return load_dataset(run.train_file), load_dataset(run.test_file)


@pytest.fixture(scope="module")
def checkpoint(synth, tmp_path_factory):
    train_ds, _ = synth
    return train(tiny_train_config(), train_ds, tmp_path_factory.mktemp("run")).final_checkpoint


@pytest.fixture
def foreign_ds(tmp_path):
    ann = {"id": 0, "image_id": 0, "bbox": [4, 4, 8, 8], "taxon_id": 3}
    return load_dataset(write_annotation_file(tmp_path, [ann], {0: (32, 32)}, taxonomy=SMALL_TAXONOMY))


@pytest.fixture(scope="module")
def tree():
    return build_tree(balanced_tree_records((3, 2, 2)))


# ---- export_embeddings ------------------------------------------------------


class TestExportEmbeddings:
    def test_shape(self, synth, checkpoint, tmp_path):
        _, test_ds = synth
        table = export_embeddings(checkpoint, test_ds, tmp_path / "emb.csv")
        assert len(table) == len(test_ds)
        assert table.z.shape == (24, 16)
        assert table.rank_ids.shape == (24, 3)
        header = (tmp_path / "emb.csv").read_text(encoding="utf-8").splitlines()[0].split(",")
        assert header[:5] == ["annotation_id", "taxon_id", "rank_1", "rank_2", "rank_3"]
        assert header[-1] == "z_15"

    def test_ranks_follow_lineage(self, synth, checkpoint):
        _, test_ds = synth
        table = export_embeddings(checkpoint, test_ds)
        for taxon, ranks in zip(table.taxon_ids, table.rank_ids):
            assert ranks[-1] == taxon
            assert ranks[0] == test_ds.tree.ancestor_at(int(taxon), 1)

    def test_deterministic(self, synth, checkpoint):
        _, test_ds = synth
        a = export_embeddings(checkpoint, test_ds)
        b = export_embeddings(checkpoint, test_ds)
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.annotation_ids, b.annotation_ids)

    def test_file_reproduces_statistic(self, synth, checkpoint, tmp_path):
        _, test_ds = synth
        table = export_embeddings(checkpoint, test_ds, tmp_path / "emb.csv")
        loaded = read_embeddings(tmp_path / "emb.csv")
        np.testing.assert_array_equal(loaded.z, table.z)
        in_process = hierarchy_consistency_stat(table.z, table.taxon_ids, test_ds.tree)
        from_file = hierarchy_consistency_stat(loaded.z, loaded.taxon_ids, test_ds.tree)
        assert from_file == in_process

    def test_label_space_mismatch(self, checkpoint, foreign_ds, tmp_path):
        with pytest.raises(CheckpointError, match="mismatch"):
            export_embeddings(checkpoint, foreign_ds, tmp_path / "emb.csv")
        assert not (tmp_path / "emb.csv").exists()


# ---- hierarchy_consistency_stat ---------------------------------------------


class TestHierarchyConsistency:
    def test_one_hot_codes(self, tree):
        leaves = tree.leaves()
        taxa = [leaves[i % 12] for i in range(60)]
        z = np.eye(12)[[leaves.index(t) for t in taxa]]
        stats = hierarchy_consistency_stat(z, taxa, tree)
        assert stats.intra_inter_ratio == 0.0
        assert stats.rank_correlation > 0
        assert stats.n_classes == 12

    def test_random_embeddings_uncorrelated(self, tree):
        rng = np.random.default_rng(0)
        leaves = tree.leaves()
        taxa = np.asarray([leaves[i % 12] for i in range(120)])
        z = rng.normal(size=(120, 16))
        observed = hierarchy_consistency_stat(z, taxa, tree).rank_correlation
        null = [
            hierarchy_consistency_stat(z, rng.permutation(taxa), tree).rank_correlation
            for _ in range(20)
        ]
        assert abs(observed) <= 4 * np.std(null) + 0.02
        assert abs(observed) < 0.1

    def test_hierarchical_clusters(self, tree):
        rng = np.random.default_rng(1)
        direction = {node: rng.normal(size=32) for node in tree.nodes}
        weights = {1: 4.0, 2: 2.0, 3: 1.0}

        def centroid(leaf):
            return sum(weights[r] * direction[tree.ancestor_at(leaf, r)] for r in (1, 2, 3))

        leaves = tree.leaves()
        taxa = [leaves[i % 12] for i in range(96)]
        z = np.stack([centroid(t) + 0.1 * rng.normal(size=32) for t in taxa])
        stats = hierarchy_consistency_stat(z, taxa, tree)
        assert stats.rank_correlation > 0.5
        assert stats.intra_inter_ratio < 0.2

    def test_pair_subsampling(self, tree):
        rng = np.random.default_rng(2)
        leaves = tree.leaves()
        taxa = [leaves[i % 12] for i in range(60)]
        stats = hierarchy_consistency_stat(rng.normal(size=(60, 4)), taxa, tree, max_pairs=500)
        assert stats.n_pairs == 500

    def test_single_class_rejected(self, tree):
        leaf = tree.leaves()[0]
        with pytest.raises(TaxonomyError):
            hierarchy_consistency_stat(np.ones((5, 3)), [leaf] * 5, tree)


# ---- attention heatmaps -----------------------------------------------------


class TestAttentionHeatmap:
    def test_uniform_is_flat(self):
        heat = attention_heatmap(np.full((4, 16), 1 / 16), 32)
        assert heat.shape == (32, 32)
        np.testing.assert_array_equal(heat, np.full((32, 32), 0.5))

    def test_one_hot_single_bright_cell(self):
        weights = np.zeros((2, 16))
        weights[:, 6] = 1.0  # row 1, column 2 of the 4 x 4 grid
        heat = attention_heatmap(weights, 32)
        assert heat.max() == pytest.approx(1.0) and heat.min() == pytest.approx(0.0)
        row, col = np.unravel_index(np.argmax(heat), heat.shape)
        assert 8 <= row < 16 and 16 <= col < 24
        bright = heat > 0.5
        rows, cols = np.nonzero(bright)
        assert rows.min() >= 4 and rows.max() < 20 and cols.min() >= 12 and cols.max() < 28

    def test_non_square_grid(self):
        with pytest.raises(ShapeError):
            attention_heatmap(np.full((1, 12), 1 / 12), 32)

    def test_overlay_half_opacity(self):
        crop = np.full((8, 8, 3), 0.2)
        out = overlay_heatmap(crop, np.full((8, 8), 0.5))
        assert out.dtype == np.uint8
        assert (out == out[0, 0]).all()
        from matplotlib import colormaps

        expected = np.round((0.5 * 0.2 + 0.5 * np.asarray(colormaps["jet"](0.5)[:3])) * 255)
        np.testing.assert_array_equal(out[0, 0], expected.astype(np.uint8))


class TestExportAttention:
    def test_files_and_rows(self, synth, checkpoint, tmp_path):
        _, test_ds = synth
        ids = list(test_ds.annotation_ids[:2])
        written = export_attention(checkpoint, test_ds, ids, tmp_path)
        names = {p.name for p in written}
        for annotation_id in ids:
            for suffix in ("c3", "c5", "full"):
                assert f"{annotation_id}_{suffix}.png" in names
        assert ATTENTION_ARCHIVE in names
        with Image.open(tmp_path / f"{ids[0]}_c3.png") as img:
            assert img.size == (16, 16)
        archive = np.load(tmp_path / ATTENTION_ARCHIVE)
        assert len(archive.files) == 6
        for key in archive.files:
            weights = archive[key]
            assert weights.shape == (2, 16)
            np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-5)

    def test_unknown_id(self, synth, checkpoint, tmp_path):
        _, test_ds = synth
        with pytest.raises(DatasetError, match="99999"):
            export_attention(checkpoint, test_ds, [99999], tmp_path)

    def test_label_space_mismatch(self, checkpoint, foreign_ds, tmp_path):
        with pytest.raises(CheckpointError, match="mismatch"):
            export_attention(checkpoint, foreign_ds, [0], tmp_path / "attn")
        assert not (tmp_path / "attn").exists()

    def test_roi_only_has_no_attention(self, synth, tmp_path):
        train_ds, test_ds = synth
        cfg = tiny_train_config(roi_only=True, scale_set=[], hslm="off")
        ckpt = train(cfg, train_ds, tmp_path / "run").final_checkpoint
        with pytest.raises(CheckpointError):
            export_attention(ckpt, test_ds, [test_ds.annotation_ids[0]], tmp_path / "attn")

