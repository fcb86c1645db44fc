"""Evaluation battery: SSIM, PSNR, IDS, mIoU, PA, CLIPScore, FID, and the
report table they feed."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.ndimage
import torch

log = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0  # sentinel for identical images

# standard SSIM constants on a [0, 1] dynamic range
_SSIM_C1 = (0.01) ** 2
_SSIM_C2 = (0.03) ** 2


def _to_gray(img: np.ndarray) -> np.ndarray:
    """(H, W) stays; (3, H, W) or (H, W, 3) -> Rec.601 luminance."""
    if img.ndim == 2:
        return img.astype(np.float64)
    if img.ndim == 3 and img.shape[0] == 3:
        img = np.moveaxis(img, 0, -1)
    return img @ np.array([0.299, 0.587, 0.114])


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(ax**2) / (2 * sigma**2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(a, b, window: int = 11, sigma: float = 1.5) -> float:
    """Windowed SSIM on luminance, Gaussian window 11 / sigma 1.5."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch {a.shape} vs {b.shape}")
    x, y = _to_gray(a), _to_gray(b)
    kern = _gaussian_kernel(window, sigma)

    def filt(z):
        return scipy.ndimage.convolve(z, kern, mode="nearest")

    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x**2
    var_y = filt(y * y) - mu_y**2
    cov = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return float((num / den).mean())


def psnr(a, b, max_value: float = 1.0) -> float:
    """20 log10(MAX / RMSE); identical inputs return the 100 dB cap."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch {a.shape} vs {b.shape}")
    mse = float(((a - b) ** 2).mean())
    if mse == 0:
        return PSNR_CAP_DB
    return min(20.0 * math.log10(max_value / math.sqrt(mse)), PSNR_CAP_DB)


def ids(a: torch.Tensor, b: torch.Tensor, recognizer) -> float:
    """Identity discrepancy score: cosine similarity of face embeddings."""
    e1 = recognizer.embed(a if a.ndim == 4 else a.unsqueeze(0))
    e2 = recognizer.embed(b if b.ndim == 4 else b.unsqueeze(0))
    cos = torch.nn.functional.cosine_similarity(e1, e2, dim=-1)
    return float(cos.mean())


def pixel_accuracy(pred, gt) -> float:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("label map size mismatch")
    return float((pred == gt).mean())


def miou(pred, gt) -> float:
    """Class-wise IoU averaged over the classes present in the ground truth."""
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("label map size mismatch")
    ious = []
    for cls in np.unique(gt):
        inter = float(((pred == cls) & (gt == cls)).sum())
        union = float(((pred == cls) | (gt == cls)).sum())
        ious.append(inter / union)
    return float(np.mean(ious))


def clip_score(img: torch.Tensor, prompt: str, image_encoder, text_encoder) -> float:
    """100 x cosine similarity between image and prompt embeddings."""
    e_i = image_encoder.encode_image(img if img.ndim == 4 else img.unsqueeze(0))
    e_t = text_encoder.encode_text([prompt]).to(e_i.dtype)
    cos = torch.nn.functional.cosine_similarity(e_i, e_t, dim=-1)
    return float(100.0 * cos.mean())


def _frechet(mu1, cov1, mu2, cov2) -> float:
    covmean, _ = scipy.linalg.sqrtm(cov1 @ cov2, disp=False)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(covmean))


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets (N, D)."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    dim = a.shape[1]
    eps = 0.0
    if min(a.shape[0], b.shape[0]) <= dim:
        log.warning("FID with fewer samples than feature dim; regularizing covariance")
        eps = 1e-6
    mu_a, mu_b = a.mean(0), b.mean(0)
    cov_a = np.cov(a, rowvar=False) + eps * np.eye(dim)
    cov_b = np.cov(b, rowvar=False) + eps * np.eye(dim)
    return max(_frechet(mu_a, cov_a, mu_b, cov_b), 0.0)


@dataclass
class EvalReport:
    per_prompt: dict[str, dict[str, float]] = field(default_factory=dict)
    aggregate: dict[str, float] = field(default_factory=dict)
    sample_count: int = 0
    config_hash: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "aggregate": self.aggregate,
                "per_prompt": self.per_prompt,
                "sample_count": self.sample_count,
                "config_hash": self.config_hash,
            },
            indent=2,
            sort_keys=True,
        )

    def to_table(self) -> str:
        """Human-readable table in the layout of the comparison tables."""
        metrics = sorted(self.aggregate)
        lines = ["prompt".ljust(18) + "".join(m.rjust(12) for m in metrics)]
        for prompt in sorted(self.per_prompt):
            row = self.per_prompt[prompt]
            lines.append(
                prompt.ljust(18)
                + "".join(f"{row.get(m, float('nan')):12.4f}" for m in metrics)
            )
        lines.append(
            "ALL".ljust(18) + "".join(f"{self.aggregate[m]:12.4f}" for m in metrics)
        )
        return "\n".join(lines)

    def save(self, path: str | Path):
        path = Path(path)
        path.write_text(self.to_json())
        path.with_suffix(".txt").write_text(self.to_table() + "\n")
