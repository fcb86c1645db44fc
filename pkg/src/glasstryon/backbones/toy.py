"""Desk-scale differentiable substitutes for the six pretrained backbones.

The toy generator renders a face-like card at 64x64 where designated latent
channels control an ellipse-pair "eyeglasses" glyph:

    layer 0 (coarse): presence, center x/y, lens size, aspect, separation,
                      plus three skin-tone (identity) channels
    layer 1 (medium): rim thickness
    layer 2 (fine):   glyph RGB color

All edges are sigmoid-soft so every backbone is differentiable end to end.
The parser, classifier, recognizer and CLIP-style encoders are image-only
heuristics consistent with this rendering.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .base import BackboneBundle, LabelMap

# channel assignments inside the 512-wide style vectors
CH_PRESENCE, CH_CX, CH_CY, CH_SIZE, CH_ASPECT, CH_SEP = 0, 1, 2, 3, 4, 5
CH_SKIN = (6, 7, 8)  # identity channels
CH_THICK = 0  # medium layer
CH_COLOR = (0, 1, 2)  # fine layer

# fixed face-card layout (normalized coordinates, y grows downward)
BG_COLOR = (0.95, 0.95, 0.95)
SKIN_COLOR = (0.91, 0.77, 0.65)
CLOTH_COLOR = (0.24, 0.22, 0.55)
EYE_COLOR = (0.03, 0.03, 0.03)
FACE_CENTER = (0.5, 0.45)
FACE_SEMI = (0.30, 0.38)
CLOTH_Y = 0.82
EYE_Y = 0.42
EYE_DX = 0.115
EYE_R = 0.025

K_EDGE = 45.0  # glyph edge sharpness in squared-ellipse-distance units
CLOTH_ENTANGLE = 0.30  # cloth color leaks a fraction of the glyph color

PROMPT_COLORS = {
    "red": (0.70, 0.08, 0.08),
    "blue": (0.08, 0.08, 0.70),
    "green": (0.08, 0.60, 0.12),
    "yellow": (0.68, 0.65, 0.08),
    "pink": (0.70, 0.35, 0.50),
    "orange": (0.70, 0.40, 0.08),
    "purple": (0.50, 0.08, 0.65),
    "sunglasses": (0.07, 0.07, 0.07),
    "metal": (0.55, 0.55, 0.60),
}
NEUTRAL_COLOR = (0.375, 0.375, 0.375)


def glyph_params(w: torch.Tensor) -> dict[str, torch.Tensor]:
    """Map a (B, 3, 512) latent to the smooth glyph parameters."""
    coarse, medium, fine = w[:, 0], w[:, 1], w[:, 2]
    p = torch.sigmoid(8.0 * (coarse[:, CH_PRESENCE] + 0.2))
    cx = 0.5 + 0.06 * torch.tanh(coarse[:, CH_CX])
    cy = EYE_Y + 0.05 * torch.tanh(coarse[:, CH_CY])
    a = 0.145 + 0.02 * torch.tanh(coarse[:, CH_SIZE])
    b = a * (0.8 + 0.2 * torch.tanh(coarse[:, CH_ASPECT]))
    sep = 0.23 + 0.03 * torch.tanh(coarse[:, CH_SEP])
    t = 0.012 + 0.008 * torch.tanh(medium[:, CH_THICK])
    color = 0.05 + 0.65 * torch.sigmoid(2.5 * fine[:, list(CH_COLOR)])
    return {
        "presence": p, "cx": cx, "cy": cy,
        "a": a + t, "b": b + t, "sep": sep, "t": t,
        "color": color,
        "skin_shift": 0.05 * torch.tanh(coarse[:, list(CH_SKIN)]),
    }


def color_to_latent(color) -> torch.Tensor:
    """Fine-layer color channel values that render a given glyph RGB."""
    c = torch.as_tensor(color, dtype=torch.float32)
    p = ((c - 0.05) / 0.65).clamp(1e-4, 1 - 1e-4)
    return torch.log(p / (1 - p)) / 2.5


def prompt_color(prompt: str) -> tuple[float, float, float]:
    """The glyph RGB a prompt names, neutral gray when it names none."""
    for key, rgb in PROMPT_COLORS.items():
        if key in prompt.lower():
            return rgb
    return NEUTRAL_COLOR


def _grid(resolution: int, dtype, device):
    ys = (torch.arange(resolution, dtype=dtype, device=device) + 0.5) / resolution
    xs = (torch.arange(resolution, dtype=dtype, device=device) + 0.5) / resolution
    yy, xx = torch.meshgrid(ys, xs, indexing="ij")
    return xx, yy


def _glyph_soft(params, xx, yy):
    """Soft union of the two lenses and the bridge bar, (B, H, W) in [0,1]."""
    cx = params["cx"][:, None, None]
    cy = params["cy"][:, None, None]
    a = params["a"][:, None, None]
    b = params["b"][:, None, None]
    half = params["sep"][:, None, None] / 2
    t = params["t"][:, None, None]
    xx = xx[None]
    yy = yy[None]
    lenses = []
    for side in (-1.0, 1.0):
        d = ((xx - (cx + side * half)) / a) ** 2 + ((yy - cy) / b) ** 2
        lenses.append(torch.sigmoid(K_EDGE * (1.0 - d)))
    bridge = torch.sigmoid(60.0 * (half - (xx - cx).abs())) * torch.sigmoid(
        150.0 * ((t + 0.01) - (yy - cy).abs())
    )
    keep = (1 - lenses[0]) * (1 - lenses[1]) * (1 - bridge)
    return 1.0 - keep


def glyph_hard_mask(params, resolution: int) -> torch.Tensor:
    """Analytic binary glyph mask: the 0.5 level set of the soft rendering."""
    dtype = params["cx"].dtype
    xx, yy = _grid(resolution, dtype, params["cx"].device)
    cx = params["cx"][:, None, None]
    cy = params["cy"][:, None, None]
    a = params["a"][:, None, None]
    b = params["b"][:, None, None]
    half = params["sep"][:, None, None] / 2
    t = params["t"][:, None, None]
    xx = xx[None]
    yy = yy[None]
    inside = torch.zeros_like(xx, dtype=torch.bool).expand(cx.shape[0], -1, -1).clone()
    for side in (-1.0, 1.0):
        d = ((xx - (cx + side * half)) / a) ** 2 + ((yy - cy) / b) ** 2
        inside |= d < 1.0
    inside |= ((xx - cx).abs() < half) & ((yy - cy).abs() < (t + 0.01))
    return inside.to(dtype)


def _col(rgb, ref):
    return torch.tensor(rgb, dtype=ref.dtype, device=ref.device).view(1, 3, 1, 1)


class ToyGenerator(nn.Module):
    """Differentiable 64x64 face-card renderer driven by a 3-layer W+ code."""

    def __init__(self, resolution: int = 64):
        super().__init__()
        self.num_layers = 3
        self.resolution = resolution

    def synthesize(self, w: torch.Tensor) -> torch.Tensor:
        if w.ndim == 2:
            w = w.unsqueeze(0)
        if w.shape[1] != self.num_layers:
            raise ValueError(f"toy generator expects L={self.num_layers}, got {w.shape[1]}")
        B = w.shape[0]
        params = glyph_params(w)
        xx, yy = _grid(self.resolution, w.dtype, w.device)

        img = _col(BG_COLOR, w).expand(B, 3, self.resolution, self.resolution).clone()

        d_face = ((xx - FACE_CENTER[0]) / FACE_SEMI[0]) ** 2 + (
            (yy - FACE_CENTER[1]) / FACE_SEMI[1]
        ) ** 2
        face = torch.sigmoid(40.0 * (1.0 - d_face))[None, None]
        skin = _col(SKIN_COLOR, w) + params["skin_shift"].view(B, 3, 1, 1)
        img = img * (1 - face) + skin * face

        cloth_soft = torch.sigmoid(120.0 * (yy - CLOTH_Y))[None, None]
        cloth = _col(CLOTH_COLOR, w) + CLOTH_ENTANGLE * (
            (params["color"] - 0.375) * params["presence"][:, None]
        ).view(B, 3, 1, 1)
        img = img * (1 - cloth_soft) + cloth * cloth_soft

        alpha = (params["presence"][:, None, None] * _glyph_soft(params, xx, yy))[:, None]
        img = img * (1 - alpha) + params["color"].view(B, 3, 1, 1) * alpha

        for side in (-1.0, 1.0):
            d_eye = ((xx - (FACE_CENTER[0] + side * EYE_DX)) / EYE_R) ** 2 + (
                (yy - EYE_Y) / EYE_R
            ) ** 2
            eye = torch.sigmoid(80.0 * (1.0 - d_eye))[None, None]
            img = img * (1 - eye) + _col(EYE_COLOR, w) * eye

        return img.clamp(0.0, 1.0)

    forward = synthesize


class ToyFaceParser(nn.Module):
    """Soft segmentation into {background, skin, glasses, eyes, cloth} from
    color prototypes plus fixed spatial priors matching the card layout."""

    def __init__(self):
        super().__init__()
        self.label_map = LabelMap()
        self.color_scale = 150.0
        grid = torch.tensor([0.1, 0.4, 0.7])
        protos = torch.cartesian_prod(grid, grid, grid)  # (27, 3) glyph gamut
        self.register_buffer("glasses_protos", protos)
        # anti-aliased region borders blend adjacent colors; each class also
        # owns the midpoints toward its neighbours so blend pixels do not
        # drift into the glyph gamut
        skin = torch.tensor(SKIN_COLOR)
        # 75% toward skin, far enough from the glyph gamut that mid-bright
        # glyph colors are not claimed by the blend prototypes
        self.register_buffer(
            "skin_protos", torch.cat([skin[None], (protos + 3.0 * skin) / 4.0])
        )
        eye = torch.tensor(EYE_COLOR)
        self.register_buffer("eye_protos", torch.stack([eye, (eye + skin) / 2.0]))
        cloth = torch.tensor(CLOTH_COLOR)
        bg = torch.tensor(BG_COLOR)
        self.register_buffer(
            "cloth_protos",
            torch.stack([cloth, (cloth + bg) / 2.0, (cloth + skin) / 2.0]),
        )

    def _priors(self, resolution, dtype, device):
        xx, yy = _grid(resolution, dtype, device)
        d_face = ((xx - FACE_CENTER[0]) / FACE_SEMI[0]) ** 2 + (
            (yy - FACE_CENTER[1]) / FACE_SEMI[1]
        ) ** 2
        inside_face = d_face < 1.0
        cloth_region = yy > CLOTH_Y
        eye_band = ((yy - EYE_Y).abs() < 0.13) & ((xx - 0.5).abs() < 0.40) & ~cloth_region
        eye_spots = torch.zeros_like(inside_face)
        for side in (-1.0, 1.0):
            d_eye = ((xx - (FACE_CENTER[0] + side * EYE_DX)) / EYE_R) ** 2 + (
                (yy - EYE_Y) / EYE_R
            ) ** 2
            eye_spots |= d_eye < 1.0
        z = torch.zeros_like(xx)
        priors = torch.stack(
            [
                torch.where(~inside_face & ~cloth_region, z + 2.5, z - 3.0),
                torch.where(inside_face & ~cloth_region, z + 2.5, z - 3.0),
                torch.where(eye_band, z + 2.0, z - 6.0),
                torch.where(eye_spots, z + 5.0, z - 8.0),
                torch.where(cloth_region, z + 4.0, z - 8.0),
            ]
        )
        return priors  # (5, H, W)

    def parse_probs(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim == 3:
            image = image.unsqueeze(0)
        B, _, H, W = image.shape
        px = image.permute(0, 2, 3, 1)  # (B, H, W, 3)

        def dist2(proto):
            c = torch.tensor(proto, dtype=image.dtype, device=image.device)
            return ((px - c) ** 2).sum(-1)

        k = self.color_scale

        def proto_logit(protos):
            d2 = ((px[..., None, :] - protos.to(image.dtype)) ** 2).sum(-1)
            return torch.logsumexp(-k * d2, dim=-1)

        color_logits = torch.stack(
            [
                -k * dist2(BG_COLOR),
                proto_logit(self.skin_protos),
                proto_logit(self.glasses_protos),
                proto_logit(self.eye_protos),
                proto_logit(self.cloth_protos),
            ],
            dim=1,
        )  # (B, 5, H, W)
        priors = self._priors(H, image.dtype, image.device)[None]
        # prior channel order matches LabelMap ids: bg, skin, glasses, eyes, cloth
        priors = priors[:, [0, 1, 2, 3, 4]]
        logits = color_logits + torch.stack(
            [priors[:, 0], priors[:, 1], priors[:, 2], priors[:, 3], priors[:, 4]], dim=1
        )
        return torch.softmax(logits, dim=1)

    def parse_labels(self, image: torch.Tensor) -> torch.Tensor:
        return self.parse_probs(image).argmax(dim=1)

    forward = parse_probs


class ToyGlassesClassifier(nn.Module):
    """Negative soft glyph area: lower score means more eyeglasses."""

    def __init__(self, parser: ToyFaceParser | None = None):
        super().__init__()
        self.parser = parser or ToyFaceParser()

    def score(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim == 3:
            image = image.unsqueeze(0)
        probs = self.parser.parse_probs(image)
        return -10.0 * probs[:, self.parser.label_map.glasses].mean(dim=(-2, -1))

    forward = score


class ToyFaceRecognizer(nn.Module):
    """Identity embedding from skin patches away from the eye band."""

    embed_dim = 64

    def __init__(self, seed: int = 7):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.register_buffer("proj", torch.randn(64, 96, generator=g) / math.sqrt(96))

    def embed(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim == 3:
            image = image.unsqueeze(0)
        H, W = image.shape[-2:]

        def patch(y0, y1, x0, x1):
            crop = image[..., int(y0 * H) : int(y1 * H), int(x0 * W) : int(x1 * W)]
            return torch.nn.functional.adaptive_avg_pool2d(crop, (4, 4))

        # sampled outside the plausible eyewear area so the embedding is
        # robust to glasses, like a real face recognizer
        forehead = patch(0.10, 0.20, 0.40, 0.60)
        chin = patch(0.66, 0.78, 0.40, 0.60)
        feats = torch.cat([forehead.flatten(1), chin.flatten(1)], dim=1)  # (B, 96)
        # center on the base skin tone so the embedding reflects the
        # per-identity shift instead of the shared constant
        base = torch.tensor(SKIN_COLOR, dtype=image.dtype, device=image.device)
        feats = feats - base.repeat_interleave(16).repeat(2)
        return feats @ self.proj.to(image.dtype).T

    forward = embed


class ToyJointEncoder(nn.Module):
    """CLIP-stand-in: images and prompts embed into one 512-dim space.

    The image feature is the glyph-weighted mean color (centered at neutral
    gray) plus a soft presence scalar; prompts map to their target color.
    Cosine similarity in this space therefore tracks glyph color alignment.
    """

    def __init__(self, parser: ToyFaceParser | None = None, seed: int = 11):
        super().__init__()
        self.parser = parser or ToyFaceParser()
        g = torch.Generator().manual_seed(seed)
        q, _ = torch.linalg.qr(torch.randn(512, 10, generator=g))
        self.register_buffer("proj", q)  # orthonormal columns

    def _embed_feature(self, f: torch.Tensor) -> torch.Tensor:
        return f @ self.proj.to(f.dtype).T

    def encode_image(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim == 3:
            image = image.unsqueeze(0)
        probs = self.parser.parse_probs(image)
        g = probs[:, self.parser.label_map.glasses]  # (B, H, W)
        mass = g.sum(dim=(-2, -1))
        # the color feature saturates quickly (any visible glyph reports its
        # true color) while the presence feature ramps over the glyph-area
        # scale; the embedding direction therefore rotates as the glyph
        # fades, so cosine similarity is sensitive to presence, not only hue
        color_sum = (image * g.unsqueeze(1)).sum(dim=(-2, -1))
        mean_color = (color_sum + 0.5 * NEUTRAL_COLOR[0]) / (mass + 0.5).unsqueeze(1)
        presence = mass / (mass + 20.0)
        # face-context reads: identity content that a full-image embedding
        # carries but an edit-direction (difference) embedding cancels out
        H, W = image.shape[-2:]
        skin = image[..., int(0.10 * H) : int(0.20 * H), int(0.40 * W) : int(0.60 * W)]
        cloth = image[..., int(0.86 * H) : int(0.96 * H), :]
        skin_mean = skin.mean(dim=(-2, -1)) - torch.tensor(
            SKIN_COLOR, dtype=image.dtype, device=image.device
        )
        cloth_mean = cloth.mean(dim=(-2, -1)) - torch.tensor(
            CLOTH_COLOR, dtype=image.dtype, device=image.device
        )
        # gain brings the subtle per-identity shifts to the same order as the
        # glyph features, as a contrastively trained encoder would
        f = torch.cat(
            [mean_color - NEUTRAL_COLOR[0], presence.unsqueeze(1), 10.0 * skin_mean, 10.0 * cloth_mean],
            dim=1,
        )
        return self._embed_feature(f)

    def encode_text(self, prompts: list[str]) -> torch.Tensor:
        feats = []
        for prompt in prompts:
            color = prompt_color(prompt)
            feats.append(
                [color[0] - 0.375, color[1] - 0.375, color[2] - 0.375, 1.0, 0, 0, 0, 0, 0, 0]
            )
        f = torch.tensor(feats, dtype=self.proj.dtype)
        return self._embed_feature(f)


class ToyInverter(nn.Module):
    """Fixed-budget gradient-descent inversion against the toy generator."""

    def __init__(self, generator: ToyGenerator, steps: int = 150, lr: float = 0.05):
        super().__init__()
        self.generator = generator
        self.steps = steps
        self.lr = lr

    def invert(self, image: torch.Tensor) -> torch.Tensor:
        if image.ndim == 3:
            image = image.unsqueeze(0)
        w = torch.zeros(
            image.shape[0], self.generator.num_layers, 512,
            dtype=image.dtype, requires_grad=True,
        )
        opt = torch.optim.Adam([w], lr=self.lr)
        for _ in range(self.steps):
            opt.zero_grad()
            loss = torch.nn.functional.mse_loss(self.generator.synthesize(w), image)
            loss.backward()
            opt.step()
        return w.detach()

    forward = invert


def toy_bundle(resolution: int = 64) -> BackboneBundle:
    generator = ToyGenerator(resolution)
    parser = ToyFaceParser()
    joint = ToyJointEncoder(parser)
    return BackboneBundle(
        generator=generator,
        inverter=ToyInverter(generator),
        text_encoder=joint,
        image_encoder=joint,
        parser=parser,
        classifier=ToyGlassesClassifier(parser),
        recognizer=ToyFaceRecognizer(),
        kind="toy",
    )
