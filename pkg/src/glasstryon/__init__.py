"""Mask- and text-conditioned eyeglasses manipulation in an extended style
space, with toy desk-scale backbones for end-to-end verification."""

from .latent import LatentCode, LatentDelta, LatentSplit, apply_delta, merge, split
from .mapper import DisentangledMapper, EditingMapper, GlassMapper, decouple
from .mask_encoder import MaskEncoder
from .modulation import ModulationModule, fuse, modulate
from .training import GlassModel, run_stage

__all__ = [
    "DisentangledMapper",
    "EditingMapper",
    "GlassMapper",
    "GlassModel",
    "LatentCode",
    "LatentDelta",
    "LatentSplit",
    "MaskEncoder",
    "ModulationModule",
    "apply_delta",
    "decouple",
    "fuse",
    "merge",
    "modulate",
    "run_stage",
    "split",
]

__version__ = "0.1.0"
