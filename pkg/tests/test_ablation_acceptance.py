"""Tests for agent-05-training — direction-of-effect experiments on the synthetic scenes.

Trains the full variant grid over three seeds on the default synthetic
dataset with the desk-scale training config.  Hours on a CPU, so these run
only with MATANET_RUN_ACCEPTANCE=1.
"""

import os

import pytest

from agent_02_data_pipeline.src.dataset import load_dataset
from agent_04_synthetic_data.src.generator import generate
from agent_04_synthetic_data.src.spec import DEFAULTS_PATH as SYNTH_DEFAULTS, SynthSpec
from agent_05_training.src.ablation import run_ablation
from agent_05_training.src.config import SYNTHETIC_PATH, TrainConfig

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(
        os.environ.get("MATANET_RUN_ACCEPTANCE") != "1",
        reason="set MATANET_RUN_ACCEPTANCE=1 to run the synthetic ablation experiments",
    ),
]

SEEDS = (0, 1, 2)
VARIANTS = ["roi_only", "mceam_3", "mceam_3_5_full", "mceam_3_5_full_hslm", "mceam_3_5_full_hslm_random"]


@pytest.fixture(scope="module")
def summary(tmp_path_factory):
    spec = SynthSpec.from_yaml(SYNTH_DEFAULTS)
    assert (spec.alpha, spec.n_terminals, spec.train_samples, spec.test_samples) == (0.8, 12, 2000, 500)
    data = generate(spec, tmp_path_factory.mktemp("synth"))
    config = TrainConfig.from_yaml(SYNTHETIC_PATH)
    return run_ablation(
        config,
        load_dataset(data.train_file),
        load_dataset(data.test_file),
        tmp_path_factory.mktemp("ablation"),
        seeds=SEEDS,
        variants=VARIANTS,
    )


def mean(summary, variant, metric):
    return summary["variants"][variant]["mean"][metric]


def per_seed(summary, variant, metric):
    return [run[metric] for run in summary["variants"][variant]["runs"]]


# ---- context benefit --------------------------------------------------------


class TestContextBenefit:
    def test_hd_falls_with_more_context(self, summary):
        hd = {v: mean(summary, v, "hierarchical_distance") for v in ("roi_only", "mceam_3", "mceam_3_5_full")}
        assert hd["roi_only"] > hd["mceam_3"] > hd["mceam_3_5_full"]

    def test_accuracy_gain_over_roi_only(self, summary):
        gain = mean(summary, "mceam_3_5_full", "accuracy") - mean(summary, "roi_only", "accuracy")
        assert gain >= 0.05


# ---- level heads ------------------------------------------------------------


class TestHierarchySupervision:
    def test_level_heads_lower_hd(self, summary):
        assert mean(summary, "mceam_3_5_full_hslm", "hierarchical_distance") < mean(
            summary, "mceam_3_5_full", "hierarchical_distance"
        )

    def test_shuffled_levels_do_not_help(self, summary):
        assert mean(summary, "mceam_3_5_full_hslm_random", "hierarchical_distance") >= mean(
            summary, "mceam_3_5_full", "hierarchical_distance"
        )

    def test_embeddings_follow_taxonomy(self, summary):
        with_heads = per_seed(summary, "mceam_3_5_full_hslm", "rank_correlation")
        without = per_seed(summary, "mceam_3_5_full", "rank_correlation")
        assert sum(a > b for a, b in zip(with_heads, without)) >= 2

        with_heads = per_seed(summary, "mceam_3_5_full_hslm", "intra_inter_ratio")
        without = per_seed(summary, "mceam_3_5_full", "intra_inter_ratio")
        assert sum(a < b for a, b in zip(with_heads, without)) >= 2
