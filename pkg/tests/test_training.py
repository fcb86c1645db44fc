import pytest
import torch

from glasstryon.config import config_hash, latent_split, load_config
from glasstryon.losses import STAGE_TERMS, LossWeights
from glasstryon.training import (
    CorruptCheckpointError,
    GlassModel,
    StageOrderError,
    ToyPairSource,
    TrainingDivergedError,
    apply_freeze,
    compute_stage_losses,
    load_checkpoint,
    run_stage,
    save_checkpoint,
    select_trainable,
)


@pytest.fixture()
def cfg():
    return load_config(None)


@pytest.fixture()
def model(cfg):
    return GlassModel(latent_split(cfg))


def tiny_cfg(cfg, iters=2, batch=2):
    for stage in ("stage1_mask", "stage1_text", "stage2"):
        cfg[stage]["iterations"] = iters
        cfg[stage]["batch_size"] = batch
    return cfg


class TestSelectTrainable:
    def test_stage1_mask_excludes_text_and_fine(self, model):
        names = set(select_trainable("stage1_mask", model))
        assert names
        for n in names:
            assert "text_branch" not in n
            assert not n.startswith("editing.fine.")
            assert not n.startswith("disentangled.")
        assert any(n.startswith("mask_encoder.") for n in names)
        assert any("mask_branch" in n for n in names)

    def test_stage1_text_excludes_mask_paths(self, model):
        names = set(select_trainable("stage1_text", model))
        assert any("text_branch" in n for n in names)
        for n in names:
            assert not n.startswith("mask_encoder.")
            assert "mask_branch" not in n
            assert not n.startswith("disentangled.")

    def test_stage1_text_trunk_flag(self, model):
        with_trunk = set(select_trainable("stage1_text", model, train_trunk_stage1_text=True))
        without = set(select_trainable("stage1_text", model, train_trunk_stage1_text=False))
        assert without < with_trunk
        assert all("text_branch" in n for n in without)

    def test_stage2_covers_both_mappers(self, model):
        names = set(select_trainable("stage2", model))
        assert any(n.startswith("editing.") for n in names)
        assert any(n.startswith("disentangled.") for n in names)
        assert any(n.startswith("mask_encoder.") for n in names)
        no_enc = set(select_trainable("stage2", model, train_mask_encoder_stage2=False))
        assert not any(n.startswith("mask_encoder.") for n in no_enc)

    def test_unknown_stage(self, model):
        with pytest.raises(ValueError):
            select_trainable("stage9", model)

    def test_apply_freeze(self, model):
        trainable = select_trainable("stage1_mask", model)
        apply_freeze(model, trainable)
        for name, p in model.named_parameters():
            assert p.requires_grad == (name in set(trainable)), name


class TestCheckpoints:
    def test_round_trip(self, model, cfg, tmp_path):
        path = tmp_path / "ckpt.pt"
        ckpt = save_checkpoint(path, model, "stage1_mask", 10, 0.0, {"sc": 3.0}, 0, "hash")
        assert ckpt.manifest["stage_id"] == "stage1_mask"
        assert path.exists()
        assert path.with_suffix(".pt.manifest.json").exists()
        other = GlassModel(latent_split(cfg))
        loaded = load_checkpoint(path, other)
        assert loaded.manifest["iteration"] == 10
        for (n1, p1), (_, p2) in zip(model.named_parameters(), other.named_parameters()):
            assert torch.equal(p1, p2), n1

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(tmp_path / "missing.pt")

    def test_corrupt_payload(self, model, tmp_path):
        path = tmp_path / "ckpt.pt"
        save_checkpoint(path, model, "stage1_mask", 1, 0.0, {}, 0, "h")
        path.write_bytes(b"garbage")
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path, model)


class TestToyPairSource:
    def test_batch_is_pure(self):
        src = ToyPairSource(batch_size=4, seed=3)
        a, b = src.batch(7), src.batch(7)
        assert torch.equal(a["w_s"], b["w_s"])
        assert torch.equal(a["mask"], b["mask"])
        assert a["prompts"] == b["prompts"]

    def test_batches_differ(self):
        src = ToyPairSource(batch_size=4, seed=3)
        assert not torch.equal(src.batch(0)["w_s"], src.batch(1)["w_s"])

    def test_sources_have_no_glyph_masks_do(self, bundle):
        src = ToyPairSource(batch_size=4, seed=0)
        batch = src.batch(0)
        imgs = bundle.generator.synthesize(batch["w_s"])
        labels = bundle.parser.parse_labels(imgs)
        assert float((labels == 2).float().mean()) < 1e-3
        assert float(batch["mask"].sum(dim=(-2, -1)).min()) > 50


class TestComputeStageLosses:
    @pytest.mark.parametrize("stage_id", list(STAGE_TERMS))
    def test_component_sets(self, stage_id, model, bundle, cfg):
        src = ToyPairSource(batch_size=2, seed=0)
        weights = LossWeights(**cfg[stage_id]["weights"])
        total, components = compute_stage_losses(
            stage_id, model, src.batch(0), bundle, cfg[stage_id]["gamma"], weights,
            all_prompts=src.prompts,
        )
        assert set(components) == set(STAGE_TERMS[stage_id])
        assert torch.isfinite(total)

    def test_gradients_reach_trainable_params(self, model, bundle, cfg):
        src = ToyPairSource(batch_size=2, seed=0)
        weights = LossWeights(**cfg["stage1_mask"]["weights"])
        apply_freeze(model, select_trainable("stage1_mask", model))
        total, _ = compute_stage_losses(
            "stage1_mask", model, src.batch(0), bundle, 0.0, weights,
            all_prompts=src.prompts,
        )
        total.backward()
        grads = [
            p.grad for p in model.parameters() if p.requires_grad and p.grad is not None
        ]
        assert grads and any(float(g.abs().sum()) > 0 for g in grads)


class TestRunStage:
    def test_smoke_and_history(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        src = ToyPairSource(batch_size=2, seed=0)
        result = run_stage("stage1_mask", cfg, model, bundle, src, tmp_path / "s1.pt")
        assert len(result.loss_history["total"]) == 2
        assert set(STAGE_TERMS["stage1_mask"]) <= set(result.loss_history)
        assert result.checkpoint.manifest["stage_id"] == "stage1_mask"

    def test_stage_order_enforced(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        src = ToyPairSource(batch_size=2, seed=0)
        with pytest.raises(StageOrderError):
            run_stage("stage1_text", cfg, model, bundle, src, tmp_path / "s2.pt")

    def test_wrong_prerequisite_stage(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        src = ToyPairSource(batch_size=2, seed=0)
        run_stage("stage1_mask", cfg, model, bundle, src, tmp_path / "s1.pt")
        with pytest.raises(StageOrderError):
            run_stage(
                "stage2", cfg, model, bundle, src, tmp_path / "s3.pt",
                resume_from=tmp_path / "s1.pt",
            )

    def test_config_hash_mismatch_and_force(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        src = ToyPairSource(batch_size=2, seed=0)
        run_stage("stage1_mask", cfg, model, bundle, src, tmp_path / "s1.pt")
        cfg2 = load_config(None, overrides={"training": {"seed": 99}})
        tiny_cfg(cfg2)
        assert config_hash(cfg2) != config_hash(cfg)
        with pytest.raises(StageOrderError):
            run_stage(
                "stage1_text", cfg2, model, bundle, src, tmp_path / "s2.pt",
                resume_from=tmp_path / "s1.pt",
            )
        result = run_stage(
            "stage1_text", cfg2, model, bundle, src, tmp_path / "s2.pt",
            resume_from=tmp_path / "s1.pt", force=True,
        )
        assert result.checkpoint.manifest["stage_id"] == "stage1_text"

    def test_full_stage_chain(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        src = ToyPairSource(batch_size=2, seed=0)
        run_stage("stage1_mask", cfg, model, bundle, src, tmp_path / "s1.pt")
        run_stage(
            "stage1_text", cfg, model, bundle, src, tmp_path / "s2.pt",
            resume_from=tmp_path / "s1.pt",
        )
        result = run_stage(
            "stage2", cfg, model, bundle, src, tmp_path / "s3.pt",
            resume_from=tmp_path / "s2.pt",
        )
        assert set(STAGE_TERMS["stage2"]) <= set(result.loss_history)

    def test_nan_batch_dumped(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)

        class PoisonedSource(ToyPairSource):
            def batch(self, index):
                b = super().batch(index)
                b["w_s"] = torch.full_like(b["w_s"], float("nan"))
                return b

        with pytest.raises(TrainingDivergedError):
            run_stage(
                "stage1_mask", cfg, model, bundle, PoisonedSource(batch_size=2, seed=0),
                tmp_path / "bad.pt",
            )
        assert (tmp_path / "bad.nan_batch.pt").exists()

    def test_unknown_schedule_rejected(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        cfg["training"]["lr_schedule"] = "warmup"
        with pytest.raises(ValueError):
            run_stage(
                "stage1_mask", cfg, model, bundle, ToyPairSource(batch_size=2, seed=0),
                tmp_path / "s1.pt",
            )

    def test_cosine_schedule_runs(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg)
        cfg["training"]["lr_schedule"] = "cosine"
        result = run_stage(
            "stage1_mask", cfg, model, bundle, ToyPairSource(batch_size=2, seed=0),
            tmp_path / "s1.pt",
        )
        assert len(result.loss_history["total"]) == 2


class TestFreezing:
    def snapshot(self, model, predicate):
        return {
            n: p.detach().clone()
            for n, p in model.named_parameters()
            if predicate(n)
        }

    def test_stage1_mask_leaves_text_branches_untouched(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg, iters=5)
        before = self.snapshot(model, lambda n: "text_branch" in n)
        run_stage(
            "stage1_mask", cfg, model, bundle, ToyPairSource(batch_size=2, seed=0),
            tmp_path / "s1.pt",
        )
        for n, p in model.named_parameters():
            if "text_branch" in n:
                assert torch.equal(p, before[n]), n

    def test_stage1_text_leaves_mask_paths_untouched(self, model, bundle, cfg, tmp_path):
        tiny_cfg(cfg, iters=5)
        src = ToyPairSource(batch_size=2, seed=0)
        run_stage("stage1_mask", cfg, model, bundle, src, tmp_path / "s1.pt")
        is_mask_path = lambda n: n.startswith("mask_encoder.") or "mask_branch" in n
        before = self.snapshot(model, is_mask_path)
        run_stage(
            "stage1_text", cfg, model, bundle, src, tmp_path / "s2.pt",
            resume_from=tmp_path / "s1.pt",
        )
        for n, p in model.named_parameters():
            if is_mask_path(n):
                assert torch.equal(p, before[n]), n
