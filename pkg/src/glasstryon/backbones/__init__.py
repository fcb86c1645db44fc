from .base import (
    ADAPTER_KINDS,
    BackboneBundle,
    BackboneUnavailableError,
    CorruptWeightsError,
    FaceParserAdapter,
    FaceRecognizerAdapter,
    GeneratorAdapter,
    GlassesClassifierAdapter,
    ImageEncoderAdapter,
    InverterAdapter,
    LabelMap,
    TextEncoderAdapter,
    load_manifest,
    load_published,
    register_loader,
    sha256_file,
)
from .toy import (
    ToyFaceParser,
    ToyFaceRecognizer,
    ToyGenerator,
    ToyGlassesClassifier,
    ToyInverter,
    ToyJointEncoder,
    glyph_hard_mask,
    glyph_params,
    toy_bundle,
)

__all__ = [
    "ADAPTER_KINDS",
    "BackboneBundle",
    "BackboneUnavailableError",
    "CorruptWeightsError",
    "FaceParserAdapter",
    "FaceRecognizerAdapter",
    "GeneratorAdapter",
    "GlassesClassifierAdapter",
    "ImageEncoderAdapter",
    "InverterAdapter",
    "LabelMap",
    "TextEncoderAdapter",
    "ToyFaceParser",
    "ToyFaceRecognizer",
    "ToyGenerator",
    "ToyGlassesClassifier",
    "ToyInverter",
    "ToyJointEncoder",
    "glyph_hard_mask",
    "glyph_params",
    "load_manifest",
    "load_published",
    "register_loader",
    "sha256_file",
    "toy_bundle",
]
