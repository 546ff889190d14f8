"""Tests for agent-03-model — checkpoint container and encoder weight files."""

import torch
import pytest

from agent_03_model.src.checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    export_encoder_weights,
    load_checkpoint,
    load_encoder_weights,
    save_checkpoint,
)
from agent_03_model.src.config import EncoderConfig, ModelConfig
from agent_03_model.src.network import build_model

ENCODER = EncoderConfig(image_side=16, patch_size=4, embed_dim=16, depth=1, heads=4)
CONFIG = ModelConfig(num_classes=4, encoder=ENCODER, level_sizes={1: 2})


@pytest.fixture
def model():
    return build_model(CONFIG, seed=3)


# ---- save / load ------------------------------------------------------------


class TestCheckpointRoundTrip:
    def test_bit_exact_parameters(self, model, tmp_path):
        path = save_checkpoint(tmp_path / "ckpt.pt", model, [10, 11, 12, 13], {1: [1, 2]})
        ckpt = load_checkpoint(path)
        restored = ckpt.build_model()
        original = model.state_dict()
        for key, value in restored.state_dict().items():
            assert torch.equal(value, original[key])
        assert ckpt.parameter_order == tuple(original.keys())

    def test_metadata(self, model, tmp_path):
        path = save_checkpoint(
            tmp_path / "ckpt.pt",
            model,
            [10, 11, 12, 13],
            {1: [1, 2]},
            train_state={"epoch": 2, "step": 9},
            train_config={"seed": 7},
        )
        ckpt = load_checkpoint(path)
        assert ckpt.model_config == CONFIG
        assert ckpt.terminal_ids == (10, 11, 12, 13)
        assert ckpt.level_spaces == {1: (1, 2)}
        assert ckpt.train_state == {"epoch": 2, "step": 9}
        assert ckpt.train_config == {"seed": 7}
        assert isinstance(ckpt.rng_state, torch.Tensor)

    def test_optimizer_state(self, model, tmp_path):
        optimizer = torch.optim.AdamW(model.parameters(), lr=1e-3)
        model(torch.rand(2, 3, 16, 16), [(s, torch.rand(2, 3, 16, 16)) for s in CONFIG.scales]).logits.sum().backward()
        optimizer.step()
        path = save_checkpoint(tmp_path / "ckpt.pt", model, [0, 1, 2, 3], {1: [1, 2]}, optimizer=optimizer)
        ckpt = load_checkpoint(path)
        fresh = torch.optim.AdamW(ckpt.build_model().parameters(), lr=1e-3)
        fresh.load_state_dict(ckpt.optimizer_state)
        assert fresh.state_dict()["state"][0]["step"] == optimizer.state_dict()["state"][0]["step"]

    def test_same_outputs_after_reload(self, model, tmp_path):
        model.eval()
        roi = torch.rand(2, 3, 16, 16)
        contexts = [(s, torch.rand(2, 3, 16, 16)) for s in CONFIG.scales]
        before = model(roi, contexts).logits
        restored = load_checkpoint(save_checkpoint(tmp_path / "c.pt", model, [0, 1, 2, 3], {1: [1, 2]})).build_model()
        assert torch.equal(restored.eval()(roi, contexts).logits, before)

    def test_no_temp_file_left(self, model, tmp_path):
        save_checkpoint(tmp_path / "ckpt.pt", model, [0, 1, 2, 3], {})
        assert sorted(p.name for p in tmp_path.iterdir()) == ["ckpt.pt"]


class TestCheckpointErrors:
    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_checkpoint(tmp_path / "absent.pt")

    def test_version_mismatch(self, model, tmp_path):
        path = save_checkpoint(tmp_path / "ckpt.pt", model, [0, 1, 2, 3], {})
        payload = torch.load(path, weights_only=True)
        payload["format_version"] = FORMAT_VERSION + 1
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="format version"):
            load_checkpoint(path)

    def test_garbage(self, tmp_path):
        path = tmp_path / "junk.pt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


# ---- encoder weights --------------------------------------------------------


class TestEncoderWeights:
    def test_round_trip_reencodes_identically(self, model, tmp_path):
        image = torch.rand(1, 3, 16, 16)
        expected = model.encode(image, "roi").g
        path = export_encoder_weights(model, tmp_path / "encoder.pt")

        other = build_model(CONFIG, seed=99)
        assert not torch.allclose(other.encode(image, "roi").g, expected)
        load_encoder_weights(other, path)
        torch.testing.assert_close(other.encode(image, "roi").g, expected, rtol=0, atol=1e-6)
        torch.testing.assert_close(
            other.encode(image, "context", "5").p, model.encode(image, "context", "5").p, rtol=0, atol=1e-6
        )

    def test_shared_weights_broadcast_to_per_scale(self, model, tmp_path):
        path = export_encoder_weights(model, tmp_path / "encoder.pt")
        separate = build_model(
            ModelConfig(
                num_classes=4,
                encoder=EncoderConfig(**{**ENCODER.to_dict(), "shared_context_encoder": False}),
                level_sizes={1: 2},
            )
        )
        load_encoder_weights(separate, path)
        image = torch.rand(1, 3, 16, 16)
        for scale in ("3", "5", "full"):
            torch.testing.assert_close(separate.encode(image, "context", scale).g, model.encode(image, "context", scale).g)

    def test_shape_mismatch(self, model, tmp_path):
        path = export_encoder_weights(model, tmp_path / "encoder.pt")
        bigger = build_model(ModelConfig(num_classes=4, encoder=EncoderConfig(image_side=16, patch_size=4, embed_dim=32, depth=1, heads=4)))
        with pytest.raises(CheckpointError, match="does not match"):
            load_encoder_weights(bigger, path)
