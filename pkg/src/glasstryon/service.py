"""HTTP inference service and the shared edit pipeline.

POST /api/edit   EditRequest -> EditResponse (base64 PNG images in JSON)
GET  /api/presets  prompt vocabulary and default masks
GET  /health       manifest hash and backbone availability
"""

from __future__ import annotations

import base64
import io
import time
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from .backbones.base import BackboneBundle
from .backbones.toy import glyph_hard_mask, glyph_params, toy_bundle
from .config import config_hash, latent_split, load_config
from .data import PromptVocabulary
from .training import GlassModel, load_checkpoint


class EditError(Exception):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


class EditOptions(BaseModel):
    return_edit: bool = True
    return_decoupled: bool = True
    gamma_override: float | None = Field(default=None, ge=0.0, le=1.0)


class EditRequest(BaseModel):
    image: str  # base64 PNG, RGB
    mask: str  # base64 PNG, single channel {0, 255}
    prompt: str = Field(min_length=1)
    options: EditOptions = EditOptions()


class EditResponse(BaseModel):
    edit_image: str | None = None
    decoupled_image: str | None = None
    timing_ms: float
    model_manifest: str


# --- codecs ----------------------------------------------------------------

def encode_image_b64(img: torch.Tensor) -> str:
    """(3, H, W) or (1, 3, H, W) float image in [0,1] -> base64 PNG."""
    if img.ndim == 4:
        img = img[0]
    arr = (img.detach().clamp(0, 1).cpu().numpy() * 255.0).round().astype(np.uint8)
    pil = Image.fromarray(np.moveaxis(arr, 0, -1))
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def decode_image_b64(data: str) -> torch.Tensor:
    try:
        pil = Image.open(io.BytesIO(base64.b64decode(data))).convert("RGB")
    except Exception as exc:
        raise EditError("bad_image", f"cannot decode image payload: {exc}") from exc
    arr = np.asarray(pil, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def decode_mask_b64(data: str, resolution: int, allow_resize: bool = True) -> torch.Tensor:
    try:
        pil = Image.open(io.BytesIO(base64.b64decode(data))).convert("L")
    except Exception as exc:
        raise EditError("bad_mask", f"cannot decode mask payload: {exc}") from exc
    if pil.size != (resolution, resolution):
        if not allow_resize:
            raise EditError("bad_mask", f"mask must be {resolution}x{resolution}")
        pil = pil.resize((resolution, resolution), Image.NEAREST)
    arr = np.asarray(pil)
    if not np.isin(arr, (0, 255)).all():
        raise EditError("bad_mask", "mask values must be exactly 0 or 255")
    return torch.from_numpy((arr == 255).astype(np.float32))


# --- pipeline ---------------------------------------------------------------

def edit_pipeline(
    req: EditRequest,
    model: GlassModel,
    backbones: BackboneBundle,
    gamma: float,
    manifest_hash: str,
) -> EditResponse:
    """invert -> encode conditions -> full_edit -> synthesize."""
    start = time.perf_counter()
    image = decode_image_b64(req.image).unsqueeze(0)
    mask = decode_mask_b64(req.mask, model.mask_encoder.resolution)
    if req.options.gamma_override is not None:
        gamma = req.options.gamma_override
    try:
        w_s = backbones.inverter.invert(image)
    except Exception as exc:
        raise EditError("inversion_failed", str(exc), status=500) from exc
    with torch.no_grad():
        e_m = model.mask_encoder(mask.unsqueeze(0).unsqueeze(0))
        e_t = backbones.text_encoder.encode_text([req.prompt]).to(w_s.dtype)
        w_edit, w_de, _, _ = model.full_edit(w_s, e_t, e_m, gamma)
        response = EditResponse(timing_ms=0.0, model_manifest=manifest_hash)
        if req.options.return_edit:
            response.edit_image = encode_image_b64(backbones.generator.synthesize(w_edit))
        if req.options.return_decoupled:
            response.decoupled_image = encode_image_b64(backbones.generator.synthesize(w_de))
    if response.edit_image is None and response.decoupled_image is None:
        raise EditError("bad_request", "at least one output image must be requested")
    response.timing_ms = (time.perf_counter() - start) * 1000.0
    return response


def default_mask_presets(resolution: int) -> list[str]:
    """A few canonical ellipse-pair masks for the try-on UI."""
    presets = []
    for size, sep in ((0.0, 0.0), (0.8, 0.6), (-0.8, -0.6)):
        w = torch.zeros(1, 3, 512)
        w[0, 0, 0] = 2.0  # full presence
        w[0, 0, 3] = size
        w[0, 0, 5] = sep
        mask = glyph_hard_mask(glyph_params(w), resolution)[0]
        arr = (mask.numpy() * 255).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(arr, mode="L").save(buf, format="PNG")
        presets.append(base64.b64encode(buf.getvalue()).decode())
    return presets


def create_app(
    checkpoint: str | Path | None = None,
    config: str | Path | dict | None = None,
) -> FastAPI:
    cfg = config if isinstance(config, dict) else load_config(config)
    if cfg["backbones"]["kind"] != "toy":
        raise NotImplementedError("only toy backbones can be served in this build")
    backbones = toy_bundle(cfg["backbones"]["resolution"])
    model = GlassModel(
        latent_split(cfg),
        mask_resolution=cfg["model"]["mask_resolution"],
        leaky_slope=cfg["model"]["leaky_slope"],
        disentangled_input=cfg["model"]["disentangled_input"],
    )
    gamma = cfg["model"]["gamma"]
    manifest_hash = config_hash(cfg)
    if checkpoint is not None:
        ckpt = load_checkpoint(checkpoint, model)
        gamma = ckpt.manifest.get("gamma", gamma)
        manifest_hash = ckpt.manifest.get("config_hash", manifest_hash)
    model.eval()
    vocab = PromptVocabulary(
        colors=tuple(cfg["data"]["colors"]),
        styles=tuple(cfg["data"]["styles"]),
        templates=tuple(cfg["data"]["templates"]),
    )

    app = FastAPI(title="glasstryon")
    app.state.model = model
    app.state.backbones = backbones
    app.state.gamma = gamma
    app.state.manifest_hash = manifest_hash

    @app.exception_handler(EditError)
    async def edit_error_handler(_, exc: EditError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "manifest_hash": manifest_hash,
            "backbones": backbones.kind,
            "latent_layers": backbones.generator.num_layers,
            "resolution": backbones.generator.resolution,
        }

    @app.get("/api/presets")
    def presets():
        return {
            "colors": list(vocab.colors),
            "styles": list(vocab.styles),
            "prompts": vocab.all_prompts(),
            "mask_resolution": model.mask_encoder.resolution,
            "default_masks": default_mask_presets(model.mask_encoder.resolution),
        }

    @app.post("/api/edit", response_model=EditResponse, response_model_exclude_none=True)
    def edit(req: EditRequest):
        return edit_pipeline(req, model, backbones, gamma, manifest_hash)

    return app
