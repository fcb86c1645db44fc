"""The seven training losses, plus the LAB transform and region-mask helpers.

Conventions: images are (B, 3, H, W) in [0, 1]; masks are (B, H, W) binary;
segmentation labels are (B, H, W) int64. MSE-style losses are means over the
active region so the weights stay resolution-independent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .backbones.base import LabelMap

log = logging.getLogger(__name__)

# per-stage weighted-sum term sets and their published default weights
STAGE_TERMS = {
    "stage1_mask": ("sc", "cls", "norm", "id", "bg"),
    "stage1_text": ("nce", "norm", "id"),
    "stage2": ("nce", "norm", "id", "bg", "sc", "disentangle"),
}
DEFAULT_WEIGHTS = {
    "stage1_mask": {"sc": 3.0, "cls": 0.03, "norm": 0.8, "id": 0.1, "bg": 2.0},
    "stage1_text": {"nce": 0.3, "norm": 0.8, "id": 0.2},
    "stage2": {"nce": 0.3, "norm": 0.8, "id": 0.2, "bg": 5.0, "sc": 4.0, "disentangle": 1.0},
}
DISENTANGLE_LAMBDA_G = 4.0
DISENTANGLE_LAMBDA_C = 5.0


class StageWeightError(ValueError):
    """A weight was supplied for a term absent from the stage objective."""


@dataclass(frozen=True)
class LossWeights:
    sc: float = 0.0
    cls: float = 0.0
    nce: float = 0.0
    norm: float = 0.0
    id: float = 0.0
    bg: float = 0.0
    disentangle: float = 0.0
    lambda_g: float = DISENTANGLE_LAMBDA_G
    lambda_c: float = DISENTANGLE_LAMBDA_C

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise StageWeightError(f"loss weight {name} must be nonnegative, got {value}")


def build_target_label(s_src: torch.Tensor, mask: torch.Tensor, label_map: LabelMap) -> torch.Tensor:
    """Target segmentation: mask pixels become the glasses class unless the
    source labels them as eyes; everything else is left unchanged."""
    if s_src.shape != mask.shape:
        raise ValueError(f"size mismatch {tuple(s_src.shape)} vs {tuple(mask.shape)}")
    replace = (mask > 0.5) & (s_src != label_map.eyes)
    return torch.where(replace, torch.full_like(s_src, label_map.glasses), s_src)


def shape_consistency_loss(i_edit: torch.Tensor, s_tar: torch.Tensor, parser) -> torch.Tensor:
    """Mean per-pixel cross-entropy between parser probabilities and S_tar."""
    probs = parser.parse_probs(i_edit)
    if int(s_tar.max()) >= probs.shape[1]:
        raise ValueError(f"label id {int(s_tar.max())} outside parser's {probs.shape[1]} classes")
    return F.nll_loss(torch.log(probs.clamp_min(1e-12)), s_tar)


def classification_loss(i_edit: torch.Tensor, classifier) -> torch.Tensor:
    """The raw classifier score; lower means more (and more complete) glasses."""
    return classifier.score(i_edit).mean()


def clip_nce_loss(
    q: torch.Tensor,
    k_text_pos: torch.Tensor,
    k_image_pos: torch.Tensor,
    k_negs: torch.Tensor,
    tau: float = 1.0,
) -> torch.Tensor:
    """Contrastive loss pulling the edit direction toward its text and image
    positives against the negative prompts.

    Shapes: q, k_text_pos, k_image_pos (B, D); k_negs (B, N, D). All inputs
    are normalized here. The negative summand is exponentiated like the
    positives (standard InfoNCE form).
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if k_negs.ndim != 3 or k_negs.shape[1] == 0:
        raise ValueError("at least one negative pair is required")

    def norm(x):
        return x / x.norm(dim=-1, keepdim=True).clamp_min(1e-8)

    q, k_text_pos, k_image_pos, k_negs = norm(q), norm(k_text_pos), norm(k_image_pos), norm(k_negs)
    pos = torch.stack(
        [(q * k_text_pos).sum(-1) / tau, (q * k_image_pos).sum(-1) / tau], dim=1
    )  # (B, 2)
    neg = torch.einsum("bd,bnd->bn", q, k_negs) / tau
    logits = torch.cat([pos, neg], dim=1)
    return (torch.logsumexp(logits, dim=1) - torch.logsumexp(pos, dim=1)).mean()


def latent_norm_loss(w_edit: torch.Tensor, w_s: torch.Tensor) -> torch.Tensor:
    """Euclidean norm of the flattened latent difference (per-sample mean)."""
    if w_edit.shape != w_s.shape:
        raise ValueError(f"shape mismatch {tuple(w_edit.shape)} vs {tuple(w_s.shape)}")
    diff = (w_edit - w_s).flatten(start_dim=-2)
    return diff.norm(dim=-1).mean()


def id_loss(i_edit: torch.Tensor, i_src: torch.Tensor, recognizer) -> torch.Tensor:
    """1 - cosine similarity of identity embeddings, in [0, 2]."""
    e1 = recognizer.embed(i_edit)
    e2 = recognizer.embed(i_src)
    n1, n2 = e1.norm(dim=-1), e2.norm(dim=-1)
    if bool((n1 < 1e-8).any()) or bool((n2 < 1e-8).any()):
        raise ValueError("recognizer produced a zero-norm embedding")
    return (1.0 - (e1 * e2).sum(-1) / (n1 * n2)).mean()


def non_glasses_mask(image: torch.Tensor, parser) -> torch.Tensor:
    """P_ng: complement of the parser's glasses class, detached."""
    with torch.no_grad():
        labels = parser.parse_labels(image)
    return (labels != parser.label_map.glasses).to(image.dtype)


def region_mask(image: torch.Tensor, parser, class_id: int) -> torch.Tensor:
    with torch.no_grad():
        labels = parser.parse_labels(image)
    return (labels == class_id).to(image.dtype)


def background_loss(
    i_edit: torch.Tensor, i_src: torch.Tensor, mask: torch.Tensor, parser
) -> torch.Tensor:
    """MSE restricted to non-glasses pixels outside the target mask."""
    if i_edit.shape != i_src.shape:
        raise ValueError("image size mismatch")
    region = non_glasses_mask(i_edit, parser) * (1.0 - mask.to(i_edit.dtype))
    weight = region.unsqueeze(1).expand_as(i_edit)
    total = weight.sum()
    if total == 0:
        log.warning("background loss region is empty; returning 0")
        return i_edit.sum() * 0.0
    return (weight * (i_edit - i_src) ** 2).sum() / total


_SRGB_TO_XYZ = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
]
_D65 = (0.95047, 1.0, 1.08883)


def rgb_to_lab(img: torch.Tensor) -> torch.Tensor:
    """sRGB in [0,1] -> CIELAB under D65 (L in [0,100]), differentiable."""
    img = img.clamp(0.0, 1.0)
    linear = torch.where(img <= 0.04045, img / 12.92, ((img + 0.055) / 1.055) ** 2.4)
    m = torch.tensor(_SRGB_TO_XYZ, dtype=img.dtype, device=img.device)
    xyz = torch.einsum("ij,bjhw->bihw", m, linear if img.ndim == 4 else linear.unsqueeze(0))
    white = torch.tensor(_D65, dtype=img.dtype, device=img.device).view(1, 3, 1, 1)
    t = xyz / white
    delta = 6.0 / 29.0
    f = torch.where(t > delta**3, t.clamp_min(1e-12) ** (1.0 / 3.0), t / (3 * delta**2) + 4.0 / 29.0)
    L = 116.0 * f[:, 1] - 16.0
    a = 500.0 * (f[:, 0] - f[:, 1])
    b = 200.0 * (f[:, 1] - f[:, 2])
    lab = torch.stack([L, a, b], dim=1)
    return lab if img.ndim == 4 else lab.squeeze(0)


def _masked_mse(a: torch.Tensor, b: torch.Tensor, region: torch.Tensor) -> torch.Tensor:
    weight = region.unsqueeze(1).expand_as(a)
    total = weight.sum()
    if total == 0:
        return a.sum() * 0.0
    return (weight * (a - b) ** 2).sum() / total


def disentangle_loss(
    i_de: torch.Tensor,
    i_edit: torch.Tensor,
    i_src: torch.Tensor,
    parser,
    lambda_g: float = DISENTANGLE_LAMBDA_G,
    lambda_c: float = DISENTANGLE_LAMBDA_C,
) -> torch.Tensor:
    """LAB-space supervision: match I_edit inside its glasses region and the
    source inside the source's cloth region. I_edit/I_src act as targets."""
    lm = parser.label_map
    p_g = region_mask(i_edit, parser, lm.glasses)
    p_c = region_mask(i_src, parser, lm.cloth)
    lab_de = rgb_to_lab(i_de)
    lab_edit = rgb_to_lab(i_edit.detach())
    lab_src = rgb_to_lab(i_src.detach())
    return lambda_g * _masked_mse(lab_de, lab_edit, p_g) + lambda_c * _masked_mse(
        lab_de, lab_src, p_c
    )


def stage_objective(stage_id: str, components: dict[str, torch.Tensor], weights: LossWeights):
    """Weighted sum with exactly the stage's term set; a weighted component
    outside that set is an error."""
    if stage_id not in STAGE_TERMS:
        raise StageWeightError(f"unknown stage {stage_id!r}")
    terms = STAGE_TERMS[stage_id]
    for name in components:
        if name not in terms:
            raise StageWeightError(f"loss term {name!r} does not belong to {stage_id}")
    missing = [t for t in terms if t not in components]
    if missing:
        raise StageWeightError(f"stage {stage_id} missing loss terms {missing}")
    total = sum(getattr(weights, t) * components[t] for t in terms)
    return total
