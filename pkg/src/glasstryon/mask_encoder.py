"""Convolutional encoder for the binary eyeglasses mask.

Five conv blocks (conv + instance norm + ReLU), each halving the spatial
resolution, then global average pooling and a linear projection to the
512-dim mask embedding e_m.
"""

from __future__ import annotations

import torch
from torch import nn

from .latent import STYLE_DIM

CHANNELS = (16, 32, 64, 128, 256)


class MaskResolutionError(ValueError):
    pass


class MaskValueError(ValueError):
    pass


class MaskEncoder(nn.Module):
    def __init__(self, resolution: int = 256, strict_binary: bool = True):
        super().__init__()
        if resolution % 32 != 0:
            raise MaskResolutionError(f"resolution must be divisible by 32, got {resolution}")
        self.resolution = resolution
        self.strict_binary = strict_binary
        blocks = []
        in_ch = 1
        for ch in CHANNELS:
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(in_ch, ch, kernel_size=3, stride=2, padding=1),
                    # per-sample statistics, no running averages: inference
                    # behaves exactly like training
                    nn.InstanceNorm2d(ch, affine=True, track_running_stats=False),
                    nn.ReLU(),
                )
            )
            in_ch = ch
        self.blocks = nn.Sequential(*blocks)
        self.proj = nn.Linear(CHANNELS[-1], STYLE_DIM)

    def forward(self, mask: torch.Tensor) -> torch.Tensor:
        """mask: (B, 1, H, W) with values in {0, 1} -> (B, 512)."""
        if mask.ndim == 3:
            mask = mask.unsqueeze(1)
        if mask.shape[-1] != self.resolution or mask.shape[-2] != self.resolution:
            raise MaskResolutionError(
                f"expected {self.resolution}x{self.resolution} mask, got "
                f"{mask.shape[-2]}x{mask.shape[-1]}"
            )
        if self.strict_binary:
            binary = (mask == 0) | (mask == 1)
            if not bool(binary.all()):
                raise MaskValueError("mask values must be exactly 0 or 1")
        h = self.blocks(mask)
        h = h.mean(dim=(-2, -1))
        return self.proj(h)
