"""Checkpoint evaluation over a held-out toy set, reported in the metric
battery's table format."""

from __future__ import annotations

import torch

from .backbones.base import BackboneBundle
from .config import config_hash
from .losses import build_target_label
from .metrics import EvalReport, clip_score, ids, miou, pixel_accuracy, psnr, ssim
from .training import GlassModel, ToyPairSource, compute_stage_losses  # noqa: F401


def evaluate_model(
    model: GlassModel,
    backbones: BackboneBundle,
    cfg: dict,
    num_batches: int = 4,
    seed: int = 1234,
) -> EvalReport:
    model.eval()
    source = ToyPairSource(
        batch_size=8, resolution=backbones.generator.resolution, seed=seed
    )
    gamma = cfg["model"]["gamma"]
    per_prompt: dict[str, dict[str, list[float]]] = {}
    count = 0
    with torch.no_grad():
        for b in range(num_batches):
            batch = source.batch(b)
            w_s, mask = batch["w_s"], batch["mask"]
            i_src = backbones.generator.synthesize(w_s)
            e_m = model.mask_encoder(mask.unsqueeze(1))
            e_t = backbones.text_encoder.encode_text(batch["prompts"]).to(w_s.dtype)
            w_edit, w_de, _, _ = model.full_edit(w_s, e_t, e_m, gamma)
            i_edit = backbones.generator.synthesize(w_edit)
            i_de = backbones.generator.synthesize(w_de)
            s_src = backbones.parser.parse_labels(i_src)
            s_tar = build_target_label(s_src, mask, backbones.parser.label_map)
            pred = backbones.parser.parse_labels(i_edit)
            for i, prompt in enumerate(batch["prompts"]):
                row = per_prompt.setdefault(prompt, {})
                values = {
                    "ssim": ssim(i_de[i].numpy(), i_src[i].numpy()),
                    "psnr": psnr(i_de[i].numpy(), i_src[i].numpy()),
                    "ids": ids(i_de[i], i_src[i], backbones.recognizer),
                    "miou": miou(pred[i].numpy(), s_tar[i].numpy()),
                    "pa": pixel_accuracy(pred[i].numpy(), s_tar[i].numpy()),
                    "clip": clip_score(
                        i_edit[i], prompt, backbones.image_encoder, backbones.text_encoder
                    ),
                }
                for k, v in values.items():
                    row.setdefault(k, []).append(v)
                count += 1
    report = EvalReport(sample_count=count, config_hash=config_hash(cfg))
    metric_names = ["ssim", "psnr", "ids", "miou", "pa", "clip"]
    for prompt, rows in per_prompt.items():
        report.per_prompt[prompt] = {m: sum(v) / len(v) for m, v in rows.items()}
    for m in metric_names:
        all_values = [v for rows in per_prompt.values() for v in rows[m]]
        report.aggregate[m] = sum(all_values) / len(all_values)
    return report
