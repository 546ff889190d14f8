"""Tests for agent-05-training — ablation variant grid and summary."""

import json

import numpy as np
import pytest

from agent_02_data_pipeline.src.dataset import load_dataset
from agent_04_synthetic_data.src.generator import generate
from agent_05_training.src.ablation import SUMMARY_FILE, VARIANTS, run_ablation, variant_config
from tests.factories import tiny_synthetic_spec, tiny_train_config


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    run = generate(tiny_synthetic_spec(), tmp_path_factory.mktemp("synth"))
    return load_dataset(run.train_file), load_dataset(run.test_file)


# ---- variant_config ---------------------------------------------------------


class TestVariantConfig:
    def test_grid(self):
        assert list(VARIANTS) == [
            "roi_only",
            "mceam_3",
            "mceam_3_5",
            "mceam_3_5_full",
            "mceam_3_5_full_hslm",
            "mceam_3_5_full_hslm_random",
        ]

    def test_roi_only(self):
        cfg = variant_config(tiny_train_config(), "roi_only", seed=2)
        assert cfg.roi_only and cfg.scales == () and cfg.hslm == "off"
        assert cfg.seed == 2

    def test_keeps_base_settings(self):
        base = tiny_train_config(epochs=3, lr=5e-4)
        cfg = variant_config(base, "mceam_3_5_full_hslm_random", seed=1)
        assert (cfg.epochs, cfg.lr, cfg.encoder) == (3, 5e-4, base.encoder)
        assert cfg.scales == ("3", "5", "full") and cfg.hslm == "random"

    def test_from_roi_only_base(self):
        base = tiny_train_config(roi_only=True, scale_set=[])
        assert not variant_config(base, "mceam_3", seed=0).roi_only

    def test_crop_dump_per_run(self, tmp_path):
        cfg = variant_config(tiny_train_config(dump_crops=str(tmp_path)), "mceam_3", seed=1)
        assert cfg.dump_crops == str(tmp_path / "mceam_3" / "seed_1")
        assert variant_config(tiny_train_config(), "mceam_3", seed=1).dump_crops is None

    def test_unknown_variant(self):
        with pytest.raises(KeyError):
            variant_config(tiny_train_config(), "mceam_7", seed=0)


# ---- run_ablation -----------------------------------------------------------


class TestRunAblation:
    def test_summary(self, synth, tmp_path):
        train_ds, test_ds = synth
        summary = run_ablation(tiny_train_config(), train_ds, test_ds, tmp_path, seeds=[0, 1], variants=["roi_only", "mceam_3"])
        on_disk = json.loads((tmp_path / SUMMARY_FILE).read_text(encoding="utf-8"))
        assert on_disk == json.loads(json.dumps(summary))
        assert on_disk["seeds"] == [0, 1]
        assert list(on_disk["variants"]) == ["roi_only", "mceam_3"]
        for name, variant in on_disk["variants"].items():
            runs = variant["runs"]
            assert [r["seed"] for r in runs] == [0, 1]
            hd = [r["hierarchical_distance"] for r in runs]
            assert variant["mean"]["hierarchical_distance"] == pytest.approx(np.mean(hd))
            assert variant["std"]["hierarchical_distance"] == pytest.approx(np.std(hd))
            for run in runs:
                run_dir = tmp_path / name / f"seed_{run['seed']}"
                assert (run_dir / "predictions.csv").is_file()
                assert (run_dir / "report.json").is_file()
                assert (run_dir / "checkpoints" / "final.pt").is_file()
                assert 0.0 <= run["accuracy"] <= 1.0

    def test_unknown_variant_fails_before_training(self, synth, tmp_path):
        train_ds, test_ds = synth
        with pytest.raises(KeyError):
            run_ablation(tiny_train_config(), train_ds, test_ds, tmp_path, seeds=[0], variants=["nope"])
        assert not any(tmp_path.iterdir())
