"""Extended style space (W+) types and arithmetic.

A latent code is an L x 512 matrix, one style vector per generator layer.
Editing operates on the coarse / medium / fine partition of the layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

STYLE_DIM = 512


class LatentShapeError(ValueError):
    """Latent tensors with incompatible shapes or an invalid layer split."""


@dataclass(frozen=True)
class LatentSplit:
    """Contiguous coarse/medium/fine layer ranges covering [0, L)."""

    coarse: tuple[int, int]
    medium: tuple[int, int]
    fine: tuple[int, int]

    def __post_init__(self):
        c, m, f = self.coarse, self.medium, self.fine
        if not (0 == c[0] < c[1] == m[0] < m[1] == f[0] < f[1]):
            raise LatentShapeError(
                f"split ranges must be ordered, disjoint and contiguous: {c}, {m}, {f}"
            )

    @property
    def num_layers(self) -> int:
        return self.fine[1]

    @classmethod
    def default(cls, num_layers: int) -> "LatentSplit":
        """Coarse = layers 0-3, medium = 4-7, fine = rest.

        For small layer counts (toy generators) the layers are divided as
        evenly as possible, one layer per group minimum.
        """
        if num_layers < 3:
            raise LatentShapeError(f"need at least 3 layers, got {num_layers}")
        if num_layers >= 12:
            return cls((0, 4), (4, 8), (8, num_layers))
        c = max(1, num_layers // 3)
        m = max(1, (num_layers - c) // 2)
        return cls((0, c), (c, c + m), (c + m, num_layers))

    def to_dict(self) -> dict:
        return {"coarse": list(self.coarse), "medium": list(self.medium), "fine": list(self.fine)}

    @classmethod
    def from_dict(cls, d: dict) -> "LatentSplit":
        return cls(tuple(d["coarse"]), tuple(d["medium"]), tuple(d["fine"]))


@dataclass
class LatentCode:
    """A point in W+: layers is (L, 512) or batched (B, L, 512)."""

    layers: torch.Tensor
    space_tag: str = "W+"

    def __post_init__(self):
        _check_latent_tensor(self.layers)
        if self.space_tag != "W+":
            raise LatentShapeError(f"unsupported latent space {self.space_tag!r}")
        if self.layers.shape[-2] < 3:
            raise LatentShapeError("latent code needs L >= 3 layers")

    @property
    def num_layers(self) -> int:
        return self.layers.shape[-2]


@dataclass
class LatentDelta:
    """An additive edit direction, same shape as the code it modifies."""

    layers: torch.Tensor

    def __post_init__(self):
        _check_latent_tensor(self.layers)


def _check_latent_tensor(t: torch.Tensor):
    if t.ndim not in (2, 3) or t.shape[-1] != STYLE_DIM:
        raise LatentShapeError(f"expected (..., L, {STYLE_DIM}) tensor, got {tuple(t.shape)}")
    if not torch.isfinite(t).all():
        raise LatentShapeError("latent tensor contains non-finite entries")


def split(code: torch.Tensor, sp: LatentSplit) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Slice a (..., L, 512) tensor into its coarse/medium/fine layer groups."""
    if code.shape[-2] != sp.num_layers:
        raise LatentShapeError(
            f"split covers {sp.num_layers} layers but code has {code.shape[-2]}"
        )
    c = code[..., sp.coarse[0] : sp.coarse[1], :]
    m = code[..., sp.medium[0] : sp.medium[1], :]
    f = code[..., sp.fine[0] : sp.fine[1], :]
    return c, m, f


def merge(coarse: torch.Tensor, medium: torch.Tensor, fine: torch.Tensor) -> torch.Tensor:
    """Inverse of split: concatenate layer groups back into one code."""
    for part in (coarse, medium, fine):
        if part.shape[-1] != STYLE_DIM:
            raise LatentShapeError(f"expected width {STYLE_DIM}, got {part.shape[-1]}")
    return torch.cat([coarse, medium, fine], dim=-2)


def apply_delta(w: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """w + d, elementwise. Shapes must match exactly."""
    if w.shape != d.shape:
        raise LatentShapeError(f"shape mismatch {tuple(w.shape)} vs {tuple(d.shape)}")
    return w + d


def save_latent(path: str | Path, code: LatentCode, sp: LatentSplit):
    """Binary tensor blob (.npy) plus a small JSON manifest next to it."""
    path = Path(path)
    np.save(path.with_suffix(".npy"), code.layers.detach().cpu().numpy())
    manifest = {"L": code.num_layers, "split": sp.to_dict(), "space_tag": code.space_tag}
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2))


def load_latent(path: str | Path) -> tuple[LatentCode, LatentSplit]:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    layers = torch.from_numpy(np.load(path.with_suffix(".npy")))
    code = LatentCode(layers, space_tag=manifest["space_tag"])
    if code.num_layers != manifest["L"]:
        raise LatentShapeError("manifest layer count does not match tensor blob")
    return code, LatentSplit.from_dict(manifest["split"])
