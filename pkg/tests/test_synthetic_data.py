"""Tests for agent-04-synthetic-data — scene generator, truncation and ROI probe."""

import json
from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError

from agent_01_taxonomy.algorithms.tree import build_tree
from agent_02_data_pipeline.src.dataset import Dataset, DatasetError, RoiAnnotation, load_dataset
from agent_02_data_pipeline.src.roi_context import extract, square_roi_window
from agent_04_synthetic_data.src.generator import build_synthetic_taxonomy, generate, render_scene, terminal_style
from agent_04_synthetic_data.src.probe import nearest_neighbor_probe
from agent_04_synthetic_data.src.spec import DEFAULTS_PATH, SynthSpec
from agent_04_synthetic_data.src.truncation import truncate_labels
from tests.factories import balanced_tree_records

SMALL = {
    "image_side": 64,
    "roi_side_min": 8,
    "roi_side_max": 12,
    "train_samples": 24,
    "test_samples": 12,
}


def small_spec(**overrides):
    return SynthSpec(**{**SMALL, **overrides})


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    return generate(small_spec(alpha=0.5, seed=3), tmp_path_factory.mktemp("synth"))


def _memory_dataset(tree, terminals):
    annotations = tuple(RoiAnnotation(id=i, image_id=0, bbox=(0.0, 0.0, 4.0, 4.0), taxon_id=t) for i, t in enumerate(terminals))
    return Dataset(images={}, annotations=annotations, tree=tree)


# ---- SynthSpec ---------------------------------------------------------------


class TestSynthSpec:
    def test_defaults(self):
        spec = SynthSpec()
        assert spec.depth == 3 and spec.branching == (3, 2, 2)
        assert spec.n_terminals == 12
        assert (spec.image_side, spec.train_samples, spec.test_samples) == (192, 2000, 500)

    def test_defaults_file_matches(self):
        assert SynthSpec.from_yaml(DEFAULTS_PATH) == SynthSpec()

    def test_alpha_range(self):
        with pytest.raises(ValidationError):
            SynthSpec(alpha=1.5)

    def test_branching_matches_depth(self):
        with pytest.raises(ValidationError):
            SynthSpec(depth=2, branching=(3, 2, 2))

    def test_branching_product(self):
        with pytest.raises(ValidationError):
            SynthSpec(depth=2, branching=(1, 1))

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            SynthSpec(colour="red")


# ---- taxonomy and styles ----------------------------------------------------


class TestSyntheticTaxonomy:
    def test_shape(self):
        tree = build_synthetic_taxonomy((3, 2, 2))
        assert tree.depth == 3
        assert len(tree.leaves()) == 12
        assert tuple(len(level) for level in tree.level_index) == (1, 3, 6, 12)

    def test_siblings_share_everything_but_mark(self):
        tree = build_synthetic_taxonomy((3, 2, 2))
        parent = tree.level_index[2][0]
        a, b = (terminal_style(tree, t) for t in tree.children(parent))
        assert (a.background, a.grain, a.shape) == (b.background, b.grain, b.shape)
        assert a.sibling_index != b.sibling_index
        assert a.companion_color != b.companion_color

    def test_genera_have_distinct_shapes(self):
        tree = build_synthetic_taxonomy((3, 2, 2))
        shapes = {terminal_style(tree, tree.children(g)[0]).shape for g in tree.level_index[2]}
        assert len(shapes) == 6


class TestRenderScene:
    def test_alpha_zero_always_marked(self):
        spec = small_spec(alpha=0.0)
        tree = build_synthetic_taxonomy(spec.branching)
        for i in range(20):
            assert not render_scene(spec, tree, tree.leaves()[i % 12], np.random.default_rng(i)).mark_omitted

    def test_alpha_one_siblings_identical_inside_roi(self):
        """Same draws, sibling terminals: ROI crops match, the scenes do not."""
        spec = small_spec(alpha=1.0)
        tree = build_synthetic_taxonomy(spec.branching)
        a, b = tree.children(tree.level_index[2][1])
        scene_a = render_scene(spec, tree, a, np.random.default_rng(5))
        scene_b = render_scene(spec, tree, b, np.random.default_rng(5))
        assert scene_a.bbox == scene_b.bbox and scene_a.mark_omitted
        window = square_roi_window(scene_a.bbox)
        crop_a = extract(scene_a.image / 255.0, window, 16)
        crop_b = extract(scene_b.image / 255.0, window, 16)
        np.testing.assert_array_equal(crop_a, crop_b)
        assert not np.array_equal(scene_a.image, scene_b.image)

    def test_bbox_inside_image(self):
        spec = small_spec()
        tree = build_synthetic_taxonomy(spec.branching)
        for i in range(30):
            x, y, w, h = render_scene(spec, tree, tree.leaves()[0], np.random.default_rng(i)).bbox
            assert w == h and spec.roi_side_min <= w <= spec.roi_side_max
            assert x >= 0 and y >= 0 and x + w <= spec.image_side and y + h <= spec.image_side


# ---- generate ---------------------------------------------------------------


class TestGenerate:
    def test_loads_with_manifest_counts(self, small_run):
        manifest = json.loads(small_run.manifest_file.read_text(encoding="utf-8"))
        for split, path in (("train", small_run.train_file), ("test", small_run.test_file)):
            counts = load_dataset(path).counts()
            expected = manifest["counts"][split]
            assert (counts["images"], counts["rois"], counts["classes"]) == (
                expected["images"],
                expected["rois"],
                expected["classes"],
            )
        assert manifest["alpha"] == 0.5 and manifest["seed"] == 3

    def test_class_balance(self, small_run):
        for path in (small_run.train_file, small_run.test_file):
            counts = Counter(load_dataset(path).terminals())
            assert len(counts) == 12
            assert max(counts.values()) - min(counts.values()) <= 1

    def test_byte_identical_runs(self, tmp_path):
        spec = small_spec(train_samples=6, test_samples=3, seed=11)
        a = generate(spec, tmp_path / "a")
        b = generate(spec, tmp_path / "b")
        files = sorted(p.relative_to(a.out_dir) for p in a.out_dir.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(b.out_dir) for p in b.out_dir.rglob("*") if p.is_file())
        for rel in files:
            assert (a.out_dir / rel).read_bytes() == (b.out_dir / rel).read_bytes()
        assert a.manifest["checksum"] == b.manifest["checksum"]

    def test_seed_changes_output(self, tmp_path):
        a = generate(small_spec(train_samples=4, test_samples=2, seed=1), tmp_path / "a")
        b = generate(small_spec(train_samples=4, test_samples=2, seed=2), tmp_path / "b")
        assert a.manifest["checksum"] != b.manifest["checksum"]

    def test_mark_omission_recorded(self, tmp_path):
        run = generate(small_spec(alpha=1.0, train_samples=5, test_samples=3), tmp_path)
        assert run.manifest["mark_omitted"] == {"train": [0, 1, 2, 3, 4], "test": [5, 6, 7]}

    def test_truncate_fraction_applied_to_train(self, tmp_path):
        run = generate(small_spec(truncate_fraction=0.25), tmp_path)
        train = load_dataset(run.train_file)
        assert len(run.manifest["truncated"]) == 6
        above_leaves = [a.id for a in train.annotations if train.tree.rank(a.taxon_id) < train.tree.depth]
        assert sorted(above_leaves) == sorted(run.manifest["truncated"])
        test = load_dataset(run.test_file)
        assert all(test.tree.rank(t) == test.tree.depth for t in test.terminals())


# ---- truncate_labels --------------------------------------------------------


class TestTruncateLabels:
    @pytest.fixture
    def thousand(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        leaves = tree.leaves()
        return _memory_dataset(tree, [leaves[i % len(leaves)] for i in range(1000)])

    def test_fraction_zero(self, thousand):
        assert truncate_labels(thousand, 0.0, seed=1).annotations == thousand.annotations

    def test_fraction_one(self, thousand):
        out = truncate_labels(thousand, 1.0, seed=1)
        assert all(out.tree.rank(t) < out.tree.depth for t in out.terminals())

    def test_exact_count_and_ancestry(self, thousand):
        out = truncate_labels(thousand, 0.2, seed=4)
        original = thousand.annotation_map()
        changed = [a for a in out.annotations if a.taxon_id != original[a.id].taxon_id]
        assert len(changed) == 200
        for ann in changed:
            proper = thousand.tree.ancestors(original[ann.id].taxon_id)[1:]
            assert ann.taxon_id in proper

    def test_ancestor_rank_uniform(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        leaves = tree.leaves()
        ds = _memory_dataset(tree, [leaves[i % len(leaves)] for i in range(1200)])
        ranks = Counter(tree.rank(t) for t in truncate_labels(ds, 1.0, seed=7).terminals())
        assert set(ranks) == {0, 1, 2}
        # 400 expected per rank, binomial sd ~16
        assert all(abs(ranks[r] - 400) < 70 for r in (0, 1, 2))

    def test_root_labels_not_redrawn(self):
        tree = build_tree(balanced_tree_records((3, 2, 2)))
        leaves = tree.leaves()
        ds = _memory_dataset(tree, [tree.root_id] * 4 + list(leaves[:4]))
        out = truncate_labels(ds, 0.5, seed=0)
        assert out.terminals()[:4] == [tree.root_id] * 4
        assert all(tree.rank(t) < tree.depth for t in out.terminals()[4:])

    def test_deterministic(self, thousand):
        assert truncate_labels(thousand, 0.3, 2).annotations == truncate_labels(thousand, 0.3, 2).annotations

    def test_root_only_ancestor(self):
        tree = build_tree(balanced_tree_records((4,)))
        out = truncate_labels(_memory_dataset(tree, [1, 2, 3, 4]), 1.0, seed=0)
        assert out.terminals() == [0, 0, 0, 0]

    def test_fraction_out_of_range(self, thousand):
        with pytest.raises(DatasetError):
            truncate_labels(thousand, 1.5, seed=0)


# ---- nearest-neighbour probe ------------------------------------------------


class TestNearestNeighborProbe:
    @pytest.fixture(scope="class")
    def probes(self, tmp_path_factory):
        results = {}
        for alpha in (0.0, 0.5, 1.0):
            spec = SynthSpec(
                image_side=96,
                roi_side_min=12,
                roi_side_max=20,
                train_samples=240,
                test_samples=120,
                alpha=alpha,
                seed=0,
            )
            run = generate(spec, tmp_path_factory.mktemp(f"probe{alpha}"))
            results[alpha] = nearest_neighbor_probe(
                load_dataset(run.train_file),
                load_dataset(run.test_file),
                ambiguous_ids=run.manifest["mark_omitted"]["test"],
            )
        return results

    def test_context_free_when_alpha_zero(self, probes):
        assert probes[0.0].n_ambiguous == 0
        assert probes[0.0].accuracy > probes[1.0].accuracy + 0.2

    def test_ambiguous_accuracy_near_sibling_bound(self, probes):
        # two siblings per parent: at best one half of ambiguous samples
        assert probes[1.0].n_ambiguous == 120
        assert probes[1.0].ambiguous_accuracy <= 0.5 + 0.15

    def test_monotone_in_alpha(self, probes):
        slack = 0.05
        assert probes[0.0].accuracy + slack >= probes[0.5].accuracy
        assert probes[0.5].accuracy + slack >= probes[1.0].accuracy
