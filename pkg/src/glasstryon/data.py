"""Training-pair construction: split a corpus by eyeglasses presence, pull
masks from the with-glasses images, and assign each no-glasses face the
pose-nearest mask within a threshold."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

log = logging.getLogger(__name__)


class EmptyMaskError(ValueError):
    """Parser found no eyeglasses pixels; image dropped from the mask pool."""


class NoFaceError(ValueError):
    pass


@dataclass(frozen=True)
class PromptVocabulary:
    colors: tuple[str, ...] = ("red", "blue", "green", "yellow", "pink", "orange", "purple")
    styles: tuple[str, ...] = ("metal glasses", "sunglasses")
    templates: tuple[str, ...] = ("{color} glasses",)

    def all_prompts(self) -> list[str]:
        prompts = [t.format(color=c) for t in self.templates for c in self.colors]
        prompts.extend(self.styles)
        return prompts


@dataclass
class DataPair:
    face_path: str
    mask_path: str
    yaw: float
    pitch: float
    prompt: str | None = None


# --- mask file format: single-channel PNG, 255 = eyeglasses ---------------

def save_mask_png(path: str | Path, mask: np.ndarray | torch.Tensor):
    if isinstance(mask, torch.Tensor):
        mask = mask.detach().cpu().numpy()
    arr = (np.asarray(mask) > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def load_mask_png(path: str | Path) -> torch.Tensor:
    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    if not np.isin(arr, (0, 255)).all():
        raise ValueError(f"{path} is not a binary {{0,255}} mask")
    return torch.from_numpy((arr == 255).astype(np.float32))


# --- pipeline operations ---------------------------------------------------

def split_by_eyeglasses(
    corpus: list[str | Path],
    classifier=None,
    annotations: dict[str, bool] | None = None,
    threshold: float = -1.0,
) -> tuple[list[str], list[str]]:
    """Partition image paths into (with_glasses, without_glasses).

    Uses explicit annotations when given, otherwise the classifier score
    (score below threshold means glasses present, per its sign convention).
    """
    with_glasses, without = [], []
    for path in corpus:
        path = str(path)
        try:
            if annotations is not None:
                has = annotations[Path(path).name]
            else:
                img = _load_image(path)
                has = float(classifier.score(img.unsqueeze(0))) < threshold
        except (OSError, KeyError) as exc:
            log.warning("skipping unreadable corpus entry %s: %s", path, exc)
            continue
        (with_glasses if has else without).append(path)
    log.info("corpus split: %d with glasses, %d without", len(with_glasses), len(without))
    return with_glasses, without


def _load_image(path: str | Path) -> torch.Tensor:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def extract_mask(image: torch.Tensor, parser) -> torch.Tensor:
    """Binary eyeglasses mask from the parser's argmax labels."""
    if image.ndim == 3:
        image = image.unsqueeze(0)
    labels = parser.parse_labels(image)[0]
    mask = (labels == parser.label_map.glasses).to(torch.float32)
    if mask.sum() == 0:
        raise EmptyMaskError("no eyeglasses pixels found")
    return mask


def estimate_pose(image: torch.Tensor) -> tuple[float, float, float]:
    """(yaw, pitch, roll) in degrees from eye-landmark geometry.

    Eyes are located as dark clusters in the upper face band; yaw comes from
    the horizontal offset of the eye midpoint against the face center, pitch
    from its vertical offset, roll from the interocular angle.
    """
    if image.ndim == 4:
        image = image[0]
    H, W = image.shape[-2:]
    lum = image.mean(dim=0)
    band = lum[int(0.25 * H) : int(0.60 * H)]
    dark = band < 0.15
    if int(dark.sum()) < 4:
        raise NoFaceError("no eye landmarks detected")
    ys, xs = torch.nonzero(dark, as_tuple=True)
    ys = ys.float() + int(0.25 * H)
    xs = xs.float()
    mid = xs.median()
    left = xs <= mid
    right = ~left
    if int(left.sum()) == 0 or int(right.sum()) == 0:
        raise NoFaceError("could not separate two eye clusters")
    lx, ly = float(xs[left].mean()), float(ys[left].mean())
    rx, ry = float(xs[right].mean()), float(ys[right].mean())
    eye_mid_x = (lx + rx) / 2.0 / W
    eye_mid_y = (ly + ry) / 2.0 / H
    yaw = 90.0 * (eye_mid_x - 0.5)
    pitch = 90.0 * (0.42 - eye_mid_y)
    roll = math.degrees(math.atan2(ry - ly, rx - lx))
    return yaw, pitch, roll


def build_pairs(
    faces: list[tuple[str, tuple[float, float]]],
    mask_pool: list[tuple[str, tuple[float, float]]],
    threshold_deg: float,
) -> tuple[list[DataPair], int]:
    """Match every face to the pose-nearest mask within the threshold.

    faces / mask_pool entries are (path, (yaw, pitch)). Returns the pairs and
    the count of faces skipped because no mask was close enough.
    """
    if not faces or not mask_pool:
        raise ValueError("face and mask pools must be nonempty")
    mask_poses = np.array([p for _, p in mask_pool], dtype=np.float64)
    pairs, skipped = [], 0
    for face_path, (yaw, pitch) in faces:
        d = np.hypot(mask_poses[:, 0] - yaw, mask_poses[:, 1] - pitch)
        best = int(d.argmin())
        if d[best] > threshold_deg:
            skipped += 1
            continue
        mask_path, (myaw, mpitch) = mask_pool[best]
        pairs.append(DataPair(face_path, mask_path, yaw, pitch))
    if skipped:
        log.info("build_pairs: skipped %d faces with no mask within %.1f deg", skipped, threshold_deg)
    return pairs, skipped


def sample_prompt(vocab: PromptVocabulary, rng: random.Random) -> str:
    """Templated color prompt or a bare style string."""
    pool = vocab.all_prompts()
    if not pool:
        raise ValueError("empty prompt vocabulary")
    return pool[rng.randrange(len(pool))]


def write_manifest(path: str | Path, pairs: list[DataPair]):
    """Line-delimited JSON records; byte-deterministic for a fixed input."""
    with open(path, "w") as f:
        for p in pairs:
            record = {
                "face_path": p.face_path,
                "mask_path": p.mask_path,
                "yaw": round(p.yaw, 6),
                "pitch": round(p.pitch, 6),
            }
            if p.prompt is not None:
                record["prompt"] = p.prompt
            f.write(json.dumps(record, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> list[DataPair]:
    pairs = []
    for line in Path(path).read_text().splitlines():
        d = json.loads(line)
        pairs.append(
            DataPair(d["face_path"], d["mask_path"], d["yaw"], d["pitch"], d.get("prompt"))
        )
    return pairs


def prepare_manifest(
    corpus: list[str | Path],
    parser,
    classifier,
    out_path: str | Path,
    vocab: PromptVocabulary | None = None,
    threshold_deg: float = 15.0,
    seed: int = 0,
    annotations: dict[str, bool] | None = None,
    classifier_threshold: float = -1.0,
) -> list[DataPair]:
    """End-to-end manifest construction from a raw corpus directory."""
    vocab = vocab or PromptVocabulary()
    with_glasses, without = split_by_eyeglasses(
        corpus, classifier, annotations, classifier_threshold
    )
    mask_dir = Path(out_path).parent / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    mask_pool = []
    for path in with_glasses:
        img = _load_image(path)
        try:
            mask = extract_mask(img, parser)
            pose = estimate_pose(img)
        except (EmptyMaskError, NoFaceError) as exc:
            log.warning("dropping %s from mask pool: %s", path, exc)
            continue
        mask_path = mask_dir / (Path(path).stem + "_mask.png")
        save_mask_png(mask_path, mask.numpy())
        mask_pool.append((str(mask_path), (pose[0], pose[1])))
    faces = []
    for path in without:
        try:
            pose = estimate_pose(_load_image(path))
        except NoFaceError as exc:
            log.warning("dropping face %s: %s", path, exc)
            continue
        faces.append((str(path), (pose[0], pose[1])))
    pairs, _ = build_pairs(faces, mask_pool, threshold_deg)
    rng = random.Random(seed)
    for p in pairs:
        p.prompt = sample_prompt(vocab, rng)
    write_manifest(out_path, pairs)
    return pairs
