"""Dual-branch condition modulation.

A mask branch and a text branch each map a 512-dim condition embedding to
scale/shift parameters (alpha, beta). The two parameter sets are fused by a
convex weight gamma, then applied to the instance-normalized input:

    x' = (1 + alpha) * (x - mean(x)) / std(x) + beta
"""

from __future__ import annotations

import torch
from torch import nn

EPS = 1e-5


class GammaRangeError(ValueError):
    pass


class ConditionBranch(nn.Module):
    """Single affine layer 512 -> 1024, split into (alpha, beta)."""

    def __init__(self, cond_dim: int = 512, feat_dim: int = 512):
        super().__init__()
        self.affine = nn.Linear(cond_dim, 2 * feat_dim)
        self.feat_dim = feat_dim

    def forward(self, e: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        out = self.affine(e)
        return out[..., : self.feat_dim], out[..., self.feat_dim :]

    def zero_(self):
        nn.init.zeros_(self.affine.weight)
        nn.init.zeros_(self.affine.bias)


def fuse(alpha_m, beta_m, alpha_t, beta_t, gamma: float):
    """Convex combination of mask- and text-branch parameters."""
    if not 0.0 <= gamma <= 1.0:
        raise GammaRangeError(f"gamma must lie in [0, 1], got {gamma}")
    alpha = (1.0 - gamma) * alpha_m + gamma * alpha_t
    beta = (1.0 - gamma) * beta_m + gamma * beta_t
    return alpha, beta


def modulate(x: torch.Tensor, alpha: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
    """Normalize x over its feature axis, then scale by (1+alpha), shift by beta.

    Population statistics per feature vector; eps-stabilized so a constant
    input yields exactly beta instead of NaN.
    """
    mu = x.mean(dim=-1, keepdim=True)
    sigma = x.std(dim=-1, keepdim=True, unbiased=False)
    x_norm = (x - mu) / (sigma + EPS)
    return (1.0 + alpha) * x_norm + beta


class ModulationModule(nn.Module):
    """The full module of Fig-style dual conditioning.

    text_only=True drops the mask branch entirely (used by the fine
    sub-mapper and the whole disentangled mapper); gamma is then irrelevant
    and the text parameters are applied directly.
    """

    def __init__(self, feat_dim: int = 512, text_only: bool = False):
        super().__init__()
        self.text_only = text_only
        self.text_branch = ConditionBranch(feat_dim=feat_dim)
        if not text_only:
            self.mask_branch = ConditionBranch(feat_dim=feat_dim)

    def forward(
        self,
        x: torch.Tensor,
        e_t: torch.Tensor,
        e_m: torch.Tensor | None = None,
        gamma: float = 0.5,
    ) -> torch.Tensor:
        alpha_t, beta_t = self.text_branch(e_t)
        if self.text_only:
            alpha, beta = alpha_t, beta_t
        else:
            if e_m is None:
                raise ValueError("mask condition required for a dual-branch modulation")
            alpha_m, beta_m = self.mask_branch(e_m)
            if x.ndim == 3:  # per-layer tokens share one condition per sample
                alpha_m, beta_m = alpha_m.unsqueeze(-2), beta_m.unsqueeze(-2)
                alpha_t, beta_t = alpha_t.unsqueeze(-2), beta_t.unsqueeze(-2)
            alpha, beta = fuse(alpha_m, beta_m, alpha_t, beta_t, gamma)
            return modulate(x, alpha, beta)
        if x.ndim == 3:
            alpha, beta = alpha.unsqueeze(-2), beta.unsqueeze(-2)
        return modulate(x, alpha, beta)
