"""Configuration file handling. Every published default is pre-filled; a user
config only overrides what it mentions."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .latent import LatentSplit

DEFAULTS: dict = {
    "model": {
        "latent_layers": 3,  # 18 at full scale
        "split": None,  # None -> LatentSplit.default(latent_layers)
        "gamma": 0.5,
        "leaky_slope": 0.2,
        "mask_resolution": 64,  # 256 at full scale
        "disentangled_input": "delta",
    },
    "backbones": {
        "kind": "toy",
        "resolution": 64,
        "manifest": None,
    },
    "stage1_mask": {
        "gamma": 0.0,
        "lr": 0.005,
        "iterations": 145000,
        "batch_size": 8,
        "weights": {"sc": 3.0, "cls": 0.03, "norm": 0.8, "id": 0.1, "bg": 2.0},
    },
    "stage1_text": {
        "gamma": 0.5,
        "lr": 0.002,
        "iterations": 5000,
        "batch_size": 8,
        "weights": {"nce": 0.3, "norm": 0.8, "id": 0.2},
        "train_trunk": True,
    },
    "stage2": {
        "gamma": 0.5,
        "lr": 0.001,
        "iterations": 20000,
        "batch_size": 8,
        "weights": {
            "nce": 0.3, "norm": 0.8, "id": 0.2, "bg": 5.0, "sc": 4.0, "disentangle": 1.0,
        },
        "lambda_g": 4.0,
        "lambda_c": 5.0,
        "train_mask_encoder": True,
    },
    "training": {
        "seed": 0,
        "grad_clip": 10.0,
        "log_interval": 100,
        "lr_schedule": "constant",  # or "cosine"
        "nce_tau": 0.15,
    },
    "data": {
        "pose_threshold_deg": 15.0,
        "seed": 0,
        "colors": ["red", "blue", "green", "yellow", "pink", "orange", "purple"],
        "styles": ["metal glasses", "sunglasses"],
        "templates": ["{color} glasses"],
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        user = yaml.safe_load(Path(path).read_text()) or {}
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def latent_split(cfg: dict) -> LatentSplit:
    sp = cfg["model"]["split"]
    if sp is None:
        return LatentSplit.default(cfg["model"]["latent_layers"])
    return LatentSplit(tuple(sp["coarse"]), tuple(sp["medium"]), tuple(sp["fine"]))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]
