"""Adapter contracts for the six external pretrained components.

Every contract has two implementations: one backed by published weights
(loaded through a checksum-verified manifest) and a desk-scale toy
substitute. The loss/training code only ever sees these interfaces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import torch


class BackboneUnavailableError(RuntimeError):
    """Weights missing or a loader for this kind is not installed."""


class CorruptWeightsError(RuntimeError):
    """Weights file exists but fails its manifest checksum."""


@dataclass(frozen=True)
class LabelMap:
    """Category ids used by the face parser."""

    background: int = 0
    skin: int = 1
    glasses: int = 2
    eyes: int = 3
    cloth: int = 4

    @property
    def num_classes(self) -> int:
        return 5


@runtime_checkable
class GeneratorAdapter(Protocol):
    num_layers: int
    resolution: int

    def synthesize(self, w: torch.Tensor) -> torch.Tensor:
        """(B, L, 512) latent -> (B, 3, H, W) image in [0, 1]."""
        ...


@runtime_checkable
class InverterAdapter(Protocol):
    def invert(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, L, 512) latent in W+."""
        ...


@runtime_checkable
class TextEncoderAdapter(Protocol):
    def encode_text(self, prompts: list[str]) -> torch.Tensor:
        """list of prompts -> (B, 512) embedding."""
        ...


@runtime_checkable
class ImageEncoderAdapter(Protocol):
    def encode_image(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, 512) embedding, differentiable."""
        ...


@runtime_checkable
class FaceParserAdapter(Protocol):
    label_map: LabelMap

    def parse_probs(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, C, H, W) per-pixel class probabilities."""
        ...

    def parse_labels(self, image: torch.Tensor) -> torch.Tensor:
        """argmax labels, (B, H, W) int64."""
        ...


@runtime_checkable
class GlassesClassifierAdapter(Protocol):
    def score(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B,) scalar; lower means more likely eyeglasses."""
        ...


@runtime_checkable
class FaceRecognizerAdapter(Protocol):
    embed_dim: int

    def embed(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, D) identity embedding, nonzero on valid faces."""
        ...


@dataclass
class BackboneBundle:
    """Everything the training/inference pipeline consumes."""

    generator: GeneratorAdapter
    inverter: InverterAdapter
    text_encoder: TextEncoderAdapter
    image_encoder: ImageEncoderAdapter
    parser: FaceParserAdapter
    classifier: GlassesClassifierAdapter
    recognizer: FaceRecognizerAdapter
    kind: str = "toy"
    extra: dict = field(default_factory=dict)


# --- published-weights manifest handling ---------------------------------

ADAPTER_KINDS = (
    "generator",
    "inverter",
    "text_encoder",
    "image_encoder",
    "parser",
    "classifier",
    "recognizer",
)

_LOADERS: dict[str, object] = {}


def register_loader(kind: str, factory):
    """Plug in a constructor weights_path -> adapter for published weights."""
    if kind not in ADAPTER_KINDS:
        raise ValueError(f"unknown adapter kind {kind!r}")
    _LOADERS[kind] = factory


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(path: str | Path) -> list[dict]:
    """Weights manifest: list of {kind, path, sha256, resolution?, L?}."""
    entries = json.loads(Path(path).read_text())
    for e in entries:
        if e.get("kind") not in ADAPTER_KINDS:
            raise ValueError(f"manifest entry with unknown kind: {e!r}")
    return entries


def load_published(kind: str, weights_path: str | Path, sha256: str | None = None):
    """Verify and load a published-weights adapter.

    Missing file -> BackboneUnavailableError (tests should skip, not fail).
    Checksum mismatch -> CorruptWeightsError.
    """
    if kind not in ADAPTER_KINDS:
        raise ValueError(f"unknown adapter kind {kind!r}")
    weights_path = Path(weights_path)
    if not weights_path.exists():
        raise BackboneUnavailableError(f"{kind} weights not found at {weights_path}")
    if sha256 is not None and sha256_file(weights_path) != sha256:
        raise CorruptWeightsError(f"{kind} weights at {weights_path} fail checksum")
    factory = _LOADERS.get(kind)
    if factory is None:
        raise BackboneUnavailableError(
            f"no loader registered for published {kind} weights; "
            "install the corresponding backbone package and register it"
        )
    return factory(weights_path)
