"""GlassMapper: editing mapper + disentangled mapper with gradient truncation.

The editing mapper has three sub-mappers over the coarse/medium/fine layer
groups; coarse and medium receive both mask and text conditions, fine is
text-only. The disentangled mapper is a smaller (2-block) text-only mapper
that refines the detached editing direction.
"""

from __future__ import annotations

import torch
from torch import nn

from .latent import STYLE_DIM, LatentShapeError, LatentSplit, merge, split
from .modulation import ModulationModule


class MapperBlock(nn.Module):
    """Fully connected layer -> modulation -> leaky ReLU."""

    def __init__(self, text_only: bool, leaky_slope: float = 0.2):
        super().__init__()
        self.fc = nn.Linear(STYLE_DIM, STYLE_DIM)
        self.mod = ModulationModule(text_only=text_only)
        self.act = nn.LeakyReLU(leaky_slope)

    def forward(self, x, e_t, e_m=None, gamma=0.5):
        return self.act(self.mod(self.fc(x), e_t, e_m, gamma))


class SubMapper(nn.Module):
    """A stack of blocks over one layer group, plus a zero-initialized output
    projection so the untrained mapper is the identity edit (delta = 0)."""

    def __init__(self, num_blocks: int, text_only: bool, leaky_slope: float = 0.2):
        super().__init__()
        self.text_only = text_only
        self.num_blocks = num_blocks
        for i in range(num_blocks):
            self.add_module(f"block{i}", MapperBlock(text_only, leaky_slope))
        self.proj = nn.Linear(STYLE_DIM, STYLE_DIM)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, x, e_t, e_m=None, gamma=0.5):
        h = x
        for i in range(self.num_blocks):
            h = getattr(self, f"block{i}")(h, e_t, e_m, gamma)
        return self.proj(h)


class EditingMapper(nn.Module):
    """Predicts the editing direction from (w_s, e_t, e_m). Mask conditions
    reach only the coarse and medium sub-mappers."""

    def __init__(self, split_cfg: LatentSplit, num_blocks: int = 5, leaky_slope: float = 0.2):
        super().__init__()
        self.split = split_cfg
        self.coarse = SubMapper(num_blocks, text_only=False, leaky_slope=leaky_slope)
        self.medium = SubMapper(num_blocks, text_only=False, leaky_slope=leaky_slope)
        self.fine = SubMapper(num_blocks, text_only=True, leaky_slope=leaky_slope)

    def forward(self, w_s: torch.Tensor, e_t: torch.Tensor, e_m: torch.Tensor, gamma: float):
        if w_s.shape[-2] != self.split.num_layers:
            raise LatentShapeError(
                f"mapper built for L={self.split.num_layers}, got L={w_s.shape[-2]}"
            )
        w_c, w_m, w_f = split(w_s, self.split)
        d_c = self.coarse(w_c, e_t, e_m, gamma)
        d_m = self.medium(w_m, e_t, e_m, gamma)
        d_f = self.fine(w_f, e_t)
        return merge(d_c, d_m, d_f)


class DisentangledMapper(nn.Module):
    """Text-only 2-block mapper over the (detached) editing direction."""

    def __init__(self, split_cfg: LatentSplit, num_blocks: int = 2, leaky_slope: float = 0.2):
        super().__init__()
        self.split = split_cfg
        self.coarse = SubMapper(num_blocks, text_only=True, leaky_slope=leaky_slope)
        self.medium = SubMapper(num_blocks, text_only=True, leaky_slope=leaky_slope)
        self.fine = SubMapper(num_blocks, text_only=True, leaky_slope=leaky_slope)

    def forward(self, delta: torch.Tensor, e_t: torch.Tensor):
        if delta.shape[-2] != self.split.num_layers:
            raise LatentShapeError(
                f"mapper built for L={self.split.num_layers}, got L={delta.shape[-2]}"
            )
        d_c, d_m, d_f = split(delta, self.split)
        return merge(self.coarse(d_c, e_t), self.medium(d_m, e_t), self.fine(d_f, e_t))


def decouple(delta: torch.Tensor) -> torch.Tensor:
    """Stop-gradient boundary: value-identical, no gradient path back to the
    editing mapper."""
    return delta.detach()


class GlassMapper(nn.Module):
    def __init__(
        self,
        split_cfg: LatentSplit,
        leaky_slope: float = 0.2,
        disentangled_input: str = "delta",  # "delta" (as written) or "w_edit" ablation
    ):
        super().__init__()
        if disentangled_input not in ("delta", "w_edit"):
            raise ValueError(f"unknown disentangled_input {disentangled_input!r}")
        self.split = split_cfg
        self.disentangled_input = disentangled_input
        self.editing = EditingMapper(split_cfg, leaky_slope=leaky_slope)
        self.disentangled = DisentangledMapper(split_cfg, leaky_slope=leaky_slope)

    def full_edit(self, w_s: torch.Tensor, e_t: torch.Tensor, e_m: torch.Tensor, gamma: float):
        """Returns (w_edit, w_de, delta_e, delta_de)."""
        delta_e = self.editing(w_s, e_t, e_m, gamma)
        w_edit = w_s + delta_e
        base = decouple(delta_e if self.disentangled_input == "delta" else w_edit)
        delta_de = self.disentangled(base, e_t)
        w_de = w_edit.detach() + delta_de
        return w_edit, w_de, delta_e, delta_de
