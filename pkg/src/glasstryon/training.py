"""Two-stage training: a mask phase and a text phase for the editing mapper,
then a joint phase that also learns the disentangled mapper behind the
stop-gradient boundary."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from .backbones.base import BackboneBundle
from .backbones.toy import CH_COLOR, color_to_latent, glyph_hard_mask, glyph_params, prompt_color
from .config import config_hash
from .data import PromptVocabulary
from .latent import LatentSplit
from .losses import (
    LossWeights,
    background_loss,
    build_target_label,
    classification_loss,
    clip_nce_loss,
    disentangle_loss,
    id_loss,
    latent_norm_loss,
    shape_consistency_loss,
    stage_objective,
)
from .mapper import DisentangledMapper, EditingMapper, decouple
from .mask_encoder import MaskEncoder

log = logging.getLogger(__name__)

STAGE_ORDER = {"stage1_mask": None, "stage1_text": "stage1_mask", "stage2": "stage1_text"}


class StageOrderError(RuntimeError):
    """A stage was started without its prerequisite checkpoint."""


class CorruptCheckpointError(RuntimeError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


class GlassModel(nn.Module):
    """Mask encoder + editing mapper + disentangled mapper.

    Parameter names follow the checkpoint layout:
    mask_encoder.*, editing.{coarse,medium,fine}.block{0..4}.*,
    disentangled.{coarse,medium,fine}.block{0..1}.*.
    """

    def __init__(
        self,
        split_cfg: LatentSplit,
        mask_resolution: int = 64,
        leaky_slope: float = 0.2,
        disentangled_input: str = "delta",
    ):
        super().__init__()
        self.split = split_cfg
        self.disentangled_input = disentangled_input
        self.mask_encoder = MaskEncoder(mask_resolution)
        self.editing = EditingMapper(split_cfg, leaky_slope=leaky_slope)
        self.disentangled = DisentangledMapper(split_cfg, leaky_slope=leaky_slope)

    def full_edit(self, w_s, e_t, e_m, gamma):
        delta_e = self.editing(w_s, e_t, e_m, gamma)
        w_edit = w_s + delta_e
        base = decouple(delta_e if self.disentangled_input == "delta" else w_edit)
        delta_de = self.disentangled(base, e_t)
        w_de = w_edit.detach() + delta_de
        return w_edit, w_de, delta_e, delta_de


def select_trainable(
    stage_id: str,
    model: GlassModel,
    train_trunk_stage1_text: bool = True,
    train_mask_encoder_stage2: bool = True,
) -> list[str]:
    """Exact trainable parameter-name set for a stage."""
    names = [n for n, _ in model.named_parameters()]
    if stage_id == "stage1_mask":
        # mask encoder plus everything but the text branches in the coarse and
        # medium sub-mappers; the fine mapper and disentangled mapper are out
        return [
            n
            for n in names
            if n.startswith("mask_encoder.")
            or (
                (n.startswith("editing.coarse.") or n.startswith("editing.medium."))
                and "text_branch" not in n
            )
        ]
    if stage_id == "stage1_text":
        selected = [n for n in names if n.startswith("editing.") and "text_branch" in n]
        if train_trunk_stage1_text:
            # only the text-only fine sub-mapper's trunk: its projection is
            # zero-initialized, so without this no text-driven delta can ever
            # appear; the coarse/medium trunks stay frozen to preserve the
            # mask-stage edit
            selected += [
                n
                for n in names
                if n.startswith("editing.fine.") and (".fc." in n or ".proj." in n)
            ]
        return selected
    if stage_id == "stage2":
        selected = [n for n in names if n.startswith(("editing.", "disentangled."))]
        if train_mask_encoder_stage2:
            selected += [n for n in names if n.startswith("mask_encoder.")]
        return selected
    raise ValueError(f"unknown stage {stage_id!r}")


def apply_freeze(model: GlassModel, trainable: list[str]):
    trainable_set = set(trainable)
    for name, param in model.named_parameters():
        param.requires_grad_(name in trainable_set)


# --- checkpoints -----------------------------------------------------------

@dataclass
class Checkpoint:
    path: Path
    manifest: dict


def _manifest_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".manifest.json")


def save_checkpoint(
    path: str | Path, model: GlassModel, stage_id: str, iteration: int,
    gamma: float, weights: dict, seed: int, cfg_hash: str,
) -> Checkpoint:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": model.state_dict()}, path)
    manifest = {
        "stage_id": stage_id,
        "iteration": iteration,
        "gamma": gamma,
        "weights": weights,
        "seed": seed,
        "config_hash": cfg_hash,
    }
    _manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return Checkpoint(path, manifest)


def load_checkpoint(path: str | Path, model: GlassModel | None = None) -> Checkpoint:
    path = Path(path)
    if not path.exists() or not _manifest_path(path).exists():
        raise CorruptCheckpointError(f"checkpoint or manifest missing at {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
        manifest = json.loads(_manifest_path(path).read_text())
    except Exception as exc:
        raise CorruptCheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if model is not None:
        model.load_state_dict(payload["state_dict"])
    return Checkpoint(path, manifest)


# --- toy data source -------------------------------------------------------

class ToyPairSource:
    """Deterministic on-the-fly (latent, mask, prompt) batches for the toy
    generator. batch(i) is a pure function of (seed, i)."""

    def __init__(
        self,
        batch_size: int = 16,
        resolution: int = 64,
        seed: int = 0,
        vocab: PromptVocabulary | None = None,
    ):
        self.batch_size = batch_size
        self.resolution = resolution
        self.seed = seed
        self.vocab = vocab or PromptVocabulary()
        self.prompts = self.vocab.all_prompts()

    def batch(self, index: int) -> dict:
        g = torch.Generator().manual_seed(self.seed * 1_000_003 + index)
        B = self.batch_size
        w_s = 0.3 * torch.randn(B, 3, 512, generator=g)
        # source faces carry no glyph: presence channel pushed negative
        w_s[:, 0, 0] = -0.5 - torch.rand(B, generator=g) * 0.4
        # target masks come from an independent glyph with full presence;
        # geometry spread is kept moderate so masks stay realizable
        w_mask = 0.3 * torch.randn(B, 3, 512, generator=g)
        w_mask[:, 0, 1:6] *= 0.6
        w_mask[:, 0, 0] = 1.0
        mask = glyph_hard_mask(glyph_params(w_mask), self.resolution)
        prompt_idx = torch.randint(len(self.prompts), (B,), generator=g)
        prompts = [self.prompts[int(i)] for i in prompt_idx]
        # exemplar pair for the contrastive image positive: an independent
        # face gaining glasses that match the prompt
        w_pos = 0.3 * torch.randn(B, 3, 512, generator=g)
        w_pos_src = w_pos.clone()
        w_pos_src[:, 0, 0] = -0.7
        w_pos[:, 0, 0] = 1.0
        w_pos[:, 2, list(CH_COLOR)] = torch.stack(
            [color_to_latent(prompt_color(p)) for p in prompts]
        )
        return {
            "w_s": w_s,
            "mask": mask,
            "prompt_idx": prompt_idx,
            "prompts": prompts,
            "w_pos": w_pos,
            "w_pos_src": w_pos_src,
        }


# --- stage losses ----------------------------------------------------------

def _nce_terms(batch, i_edit, i_src, backbones: BackboneBundle, all_prompts: list[str]):
    img_enc, txt_enc = backbones.image_encoder, backbones.text_encoder
    q = img_enc.encode_image(i_edit) - img_enc.encode_image(i_src).detach()
    k_text = txt_enc.encode_text(batch["prompts"]).detach()
    if "w_pos" in batch:
        # image positive: the embedding direction of an exemplar face gaining
        # glasses that match the prompt (directional CLIP-style positive)
        with torch.no_grad():
            gen = backbones.generator
            k_image = img_enc.encode_image(
                gen.synthesize(batch["w_pos"].to(i_edit.dtype))
            ) - img_enc.encode_image(gen.synthesize(batch["w_pos_src"].to(i_edit.dtype)))
    else:
        k_image = img_enc.encode_image(torch.flip(i_edit, dims=[-1])).detach()
    prompt_embs = txt_enc.encode_text(all_prompts).detach()  # (P, D)
    P = len(all_prompts)
    idx = batch["prompt_idx"]
    keep = torch.ones(len(idx), P, dtype=torch.bool)
    keep[torch.arange(len(idx)), idx] = False
    k_negs = prompt_embs[None].expand(len(idx), -1, -1)[keep].view(len(idx), P - 1, -1)
    return q, k_text, k_image, k_negs


def compute_stage_losses(
    stage_id: str,
    model: GlassModel,
    batch: dict,
    backbones: BackboneBundle,
    gamma: float,
    weights: LossWeights,
    tau: float = 1.0,
    all_prompts: list[str] | None = None,
):
    """Returns (total, components) for one batch of one stage."""
    w_s, mask = batch["w_s"], batch["mask"]
    gen, parser = backbones.generator, backbones.parser
    with torch.no_grad():
        i_src = gen.synthesize(w_s)
        s_src = parser.parse_labels(i_src)
    e_m = model.mask_encoder(mask.unsqueeze(1))
    if stage_id == "stage1_mask":
        e_t = torch.zeros(w_s.shape[0], 512, dtype=w_s.dtype)
    else:
        e_t = backbones.text_encoder.encode_text(batch["prompts"]).detach().to(w_s.dtype)

    if stage_id == "stage2":
        w_edit, w_de, _, _ = model.full_edit(w_s, e_t, e_m, gamma)
    else:
        w_edit = w_s + model.editing(w_s, e_t, e_m, gamma)
        w_de = None
    i_edit = gen.synthesize(w_edit)

    components: dict[str, torch.Tensor] = {}
    if stage_id in ("stage1_mask", "stage2"):
        s_tar = build_target_label(s_src, mask, parser.label_map)
        components["sc"] = shape_consistency_loss(i_edit, s_tar, parser)
        components["bg"] = background_loss(i_edit, i_src, mask, parser)
    if stage_id == "stage1_mask":
        components["cls"] = classification_loss(i_edit, backbones.classifier)
    if stage_id in ("stage1_text", "stage2"):
        q, k_t, k_i, k_n = _nce_terms(batch, i_edit, i_src, backbones, all_prompts)
        components["nce"] = clip_nce_loss(q, k_t, k_i, k_n, tau)
    components["norm"] = latent_norm_loss(w_edit, w_s)
    components["id"] = id_loss(i_edit, i_src, backbones.recognizer)
    if stage_id == "stage2":
        i_de = gen.synthesize(w_de)
        components["disentangle"] = disentangle_loss(
            i_de, i_edit, i_src, parser, weights.lambda_g, weights.lambda_c
        )
    total = stage_objective(stage_id, components, weights)
    return total, components


# --- the stage runner ------------------------------------------------------

@dataclass
class StageResult:
    checkpoint: Checkpoint
    loss_history: dict[str, list[float]] = field(default_factory=dict)


def run_stage(
    stage_id: str,
    cfg: dict,
    model: GlassModel,
    backbones: BackboneBundle,
    data_source,
    out_path: str | Path,
    resume_from: str | Path | None = None,
    iterations: int | None = None,
    force: bool = False,
) -> StageResult:
    """Train one stage and write a checkpoint.

    Deterministic under a fixed seed on a single device. A NaN loss halts
    training and dumps the offending batch next to the checkpoint path.
    """
    if stage_id not in STAGE_ORDER:
        raise ValueError(f"unknown stage {stage_id!r}")
    prereq = STAGE_ORDER[stage_id]
    cfg_hash = config_hash(cfg)
    if prereq is not None:
        if resume_from is None:
            raise StageOrderError(f"{stage_id} requires a {prereq} checkpoint")
        ckpt = load_checkpoint(resume_from, model)
        if ckpt.manifest["stage_id"] != prereq:
            raise StageOrderError(
                f"{stage_id} requires a {prereq} checkpoint, got "
                f"{ckpt.manifest['stage_id']!r}"
            )
        if ckpt.manifest["config_hash"] != cfg_hash and not force:
            raise StageOrderError(
                "config hash mismatch on resume; pass force=True to override"
            )

    stage_cfg = cfg[stage_id]
    seed = cfg["training"]["seed"]
    torch.manual_seed(seed)
    gamma = stage_cfg["gamma"]
    weights = LossWeights(
        **stage_cfg["weights"],
        lambda_g=stage_cfg.get("lambda_g", 4.0),
        lambda_c=stage_cfg.get("lambda_c", 5.0),
    )
    iterations = iterations if iterations is not None else stage_cfg["iterations"]
    trainable = select_trainable(
        stage_id,
        model,
        train_trunk_stage1_text=cfg["stage1_text"].get("train_trunk", True),
        train_mask_encoder_stage2=cfg["stage2"].get("train_mask_encoder", True),
    )
    apply_freeze(model, trainable)
    params = [p for n, p in model.named_parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=stage_cfg["lr"])
    schedule = cfg["training"].get("lr_schedule", "constant")
    if schedule == "cosine":
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(iterations, 1))
    elif schedule == "constant":
        sched = None
    else:
        raise ValueError(f"unknown lr schedule {schedule!r}")

    all_prompts = getattr(data_source, "prompts", PromptVocabulary().all_prompts())
    history: dict[str, list[float]] = {"total": []}
    log_interval = cfg["training"].get("log_interval", 100)
    for it in range(iterations):
        batch = data_source.batch(it)
        total, components = compute_stage_losses(
            stage_id, model, batch, backbones, gamma, weights,
            tau=cfg["training"].get("nce_tau", 1.0), all_prompts=all_prompts,
        )
        if not torch.isfinite(total):
            dump = Path(out_path).with_suffix(".nan_batch.pt")
            torch.save({"iteration": it, "batch": batch}, dump)
            raise TrainingDivergedError(f"NaN loss at iteration {it}; batch dumped to {dump}")
        opt.zero_grad()
        total.backward()
        torch.nn.utils.clip_grad_norm_(params, cfg["training"].get("grad_clip", 10.0))
        opt.step()
        if sched is not None:
            sched.step()
        history["total"].append(float(total.detach()))
        for name, value in components.items():
            history.setdefault(name, []).append(float(value.detach()))
        if it % log_interval == 0:
            log.info(
                "%s it %d/%d total=%.4f %s", stage_id, it, iterations,
                history["total"][-1],
                " ".join(f"{k}={history[k][-1]:.4f}" for k in components),
            )

    checkpoint = save_checkpoint(
        out_path, model, stage_id, iterations, gamma, stage_cfg["weights"], seed, cfg_hash
    )
    return StageResult(checkpoint, history)
