"""Command-line surface: data preparation, stage training, evaluation,
single-image editing (local or against a running service), and serving.

Exit codes: 0 ok, 2 usage, 3 missing artifact, 4 runtime failure.
"""

from __future__ import annotations

import base64
import json
import sys
from pathlib import Path

import click

from .backbones.toy import toy_bundle
from .config import latent_split, load_config
from .data import PromptVocabulary, prepare_manifest
from .evaluate import evaluate_model
from .service import EditOptions, EditRequest, create_app, edit_pipeline
from .training import (
    CorruptCheckpointError,
    GlassModel,
    StageOrderError,
    ToyPairSource,
    load_checkpoint,
    run_stage,
)

EXIT_MISSING_ARTIFACT = 3
EXIT_RUNTIME = 4

STAGE_NAMES = {"stage1-mask": "stage1_mask", "stage1-text": "stage1_text", "stage2": "stage2"}


def _build_model(cfg) -> GlassModel:
    return GlassModel(
        latent_split(cfg),
        mask_resolution=cfg["model"]["mask_resolution"],
        leaky_slope=cfg["model"]["leaky_slope"],
        disentangled_input=cfg["model"]["disentangled_input"],
    )


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Mask- and text-conditioned eyeglasses editing."""


@main.command("prepare-data")
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--annotations", type=click.Path(exists=True), help="JSON {filename: has_glasses}")
def prepare_data(corpus, out, config_path, annotations):
    """Build the (face, mask, pose, prompt) manifest from a raw corpus."""
    cfg = load_config(config_path)
    bundle = toy_bundle(cfg["backbones"]["resolution"])
    images = sorted(Path(corpus).glob("*.png")) + sorted(Path(corpus).glob("*.jpg"))
    if not images:
        _fail(EXIT_MISSING_ARTIFACT, f"no images found under {corpus}")
    ann = json.loads(Path(annotations).read_text()) if annotations else None
    vocab = PromptVocabulary(
        colors=tuple(cfg["data"]["colors"]),
        styles=tuple(cfg["data"]["styles"]),
        templates=tuple(cfg["data"]["templates"]),
    )
    pairs = prepare_manifest(
        images, bundle.parser, bundle.classifier, out,
        vocab=vocab,
        threshold_deg=cfg["data"]["pose_threshold_deg"],
        seed=cfg["data"]["seed"],
        annotations=ann,
    )
    click.echo(f"wrote {len(pairs)} pairs to {out}")


@main.command()
@click.argument("stage", type=click.Choice(sorted(STAGE_NAMES)))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--resume", type=click.Path(), help="prerequisite-stage checkpoint")
@click.option("--out", required=True, type=click.Path())
@click.option("--iterations", type=int, default=None, help="override the stage budget")
@click.option("--force", is_flag=True, help="ignore config-hash mismatch on resume")
def train(stage, config_path, resume, out, iterations, force):
    """Run one training stage and write a checkpoint."""
    cfg = load_config(config_path)
    model = _build_model(cfg)
    bundle = toy_bundle(cfg["backbones"]["resolution"])
    stage_id = STAGE_NAMES[stage]
    source = ToyPairSource(
        batch_size=cfg[stage_id]["batch_size"],
        resolution=cfg["backbones"]["resolution"],
        seed=cfg["training"]["seed"],
    )
    try:
        result = run_stage(
            stage_id, cfg, model, bundle, source, out,
            resume_from=resume, iterations=iterations, force=force,
        )
    except (StageOrderError, CorruptCheckpointError) as exc:
        _fail(EXIT_MISSING_ARTIFACT, str(exc))
    except Exception as exc:  # noqa: BLE001
        _fail(EXIT_RUNTIME, str(exc))
    click.echo(f"{stage_id} done, final loss {result.loss_history['total'][-1]:.4f}")
    click.echo(f"checkpoint: {result.checkpoint.path}")


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@click.option("--batches", type=int, default=4)
@click.option("--seed", type=int, default=1234)
def eval_cmd(checkpoint, config_path, out, batches, seed):
    """Evaluate a checkpoint on the held-out toy set."""
    cfg = load_config(config_path)
    model = _build_model(cfg)
    try:
        load_checkpoint(checkpoint, model)
    except CorruptCheckpointError as exc:
        _fail(EXIT_MISSING_ARTIFACT, str(exc))
    bundle = toy_bundle(cfg["backbones"]["resolution"])
    report = evaluate_model(model, bundle, cfg, num_batches=batches, seed=seed)
    click.echo(report.to_table())
    if out:
        report.save(out)
        click.echo(f"report written to {out}")


@main.command()
@click.option("--image", required=True, type=click.Path())
@click.option("--mask", required=True, type=click.Path())
@click.option("--prompt", required=True)
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--server", default=None, help="edit via a running service instead of locally")
@click.option("--gamma", type=float, default=None)
def edit(image, mask, prompt, out_prefix, checkpoint, config_path, server, gamma):
    """Edit one image; writes <out>_edit.png and <out>_decoupled.png."""
    for path in (image, mask):
        if not Path(path).exists():
            _fail(EXIT_MISSING_ARTIFACT, f"missing input file {path}")
    payload = {
        "image": base64.b64encode(Path(image).read_bytes()).decode(),
        "mask": base64.b64encode(Path(mask).read_bytes()).decode(),
        "prompt": prompt,
        "options": {"return_edit": True, "return_decoupled": True, "gamma_override": gamma},
    }
    if server:
        import httpx

        resp = httpx.post(f"{server.rstrip('/')}/api/edit", json=payload, timeout=120)
        if resp.status_code != 200:
            _fail(EXIT_RUNTIME, f"service error {resp.status_code}: {resp.text}")
        body = resp.json()
    else:
        cfg = load_config(config_path)
        app = create_app(checkpoint, cfg)
        req = EditRequest(
            image=payload["image"], mask=payload["mask"], prompt=prompt,
            options=EditOptions(gamma_override=gamma),
        )
        try:
            result = edit_pipeline(
                req, app.state.model, app.state.backbones, app.state.gamma,
                app.state.manifest_hash,
            )
        except Exception as exc:  # noqa: BLE001
            _fail(EXIT_RUNTIME, str(exc))
        body = result.model_dump()
    out_prefix = Path(out_prefix)
    for key, suffix in (("edit_image", "_edit.png"), ("decoupled_image", "_decoupled.png")):
        if body.get(key):
            target = out_prefix.with_name(out_prefix.name + suffix)
            target.write_bytes(base64.b64decode(body[key]))
            click.echo(f"wrote {target}")


@main.command()
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(checkpoint, config_path, host, port):
    """Start the inference HTTP service."""
    import uvicorn

    if checkpoint is not None and not Path(checkpoint).exists():
        _fail(EXIT_MISSING_ARTIFACT, f"checkpoint not found: {checkpoint}")
    app = create_app(checkpoint, load_config(config_path))
    try:
        uvicorn.run(app, host=host, port=port)
    except SystemExit:
        raise
    except OSError as exc:
        _fail(EXIT_RUNTIME, f"cannot bind {host}:{port}: {exc}")


if __name__ == "__main__":
    main()
