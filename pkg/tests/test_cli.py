import json

import numpy as np
import pytest
import torch
import yaml
from click.testing import CliRunner
from PIL import Image

from glasstryon.cli import EXIT_MISSING_ARTIFACT, main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def tiny_config(tmp_path):
    cfg = {
        "stage1_mask": {"iterations": 2, "batch_size": 2},
        "stage1_text": {"iterations": 2, "batch_size": 2},
        "stage2": {"iterations": 2, "batch_size": 2},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def write_toy_inputs(bundle, tmp_path):
    w = torch.zeros(1, 3, 512)
    img = bundle.generator.synthesize(w)[0]
    arr = (img.numpy() * 255).round().astype(np.uint8)
    img_path = tmp_path / "face.png"
    Image.fromarray(np.moveaxis(arr, 0, -1)).save(img_path)
    mask = np.zeros((64, 64), dtype=np.uint8)
    mask[24:32, 16:48] = 255
    mask_path = tmp_path / "mask.png"
    Image.fromarray(mask, mode="L").save(mask_path)
    return img_path, mask_path


class TestTrain:
    def test_stage1_mask_writes_checkpoint(self, runner, tiny_config, tmp_path):
        out = tmp_path / "ck.pt"
        result = runner.invoke(
            main, ["train", "stage1-mask", "--config", tiny_config, "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert "stage1_mask done" in result.output

    def test_stage_order_error_exit_code(self, runner, tiny_config, tmp_path):
        result = runner.invoke(
            main,
            ["train", "stage1-text", "--config", tiny_config, "--out", str(tmp_path / "x.pt")],
        )
        assert result.exit_code == EXIT_MISSING_ARTIFACT


class TestEval:
    def test_eval_reports_table(self, runner, tiny_config, tmp_path):
        ck = tmp_path / "ck.pt"
        runner.invoke(main, ["train", "stage1-mask", "--config", tiny_config, "--out", str(ck)])
        report = tmp_path / "report.json"
        result = runner.invoke(
            main,
            [
                "eval", "--checkpoint", str(ck), "--config", tiny_config,
                "--out", str(report), "--batches", "1",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "ALL" in result.output
        data = json.loads(report.read_text())
        assert set(data["aggregate"]) == {"ssim", "psnr", "ids", "miou", "pa", "clip"}

    def test_missing_checkpoint(self, runner, tiny_config, tmp_path):
        result = runner.invoke(
            main,
            ["eval", "--checkpoint", str(tmp_path / "none.pt"), "--config", tiny_config],
        )
        assert result.exit_code == EXIT_MISSING_ARTIFACT


class TestEdit:
    def test_local_edit_writes_images(self, runner, tiny_config, tmp_path, bundle):
        img_path, mask_path = write_toy_inputs(bundle, tmp_path)
        result = runner.invoke(
            main,
            [
                "edit", "--image", str(img_path), "--mask", str(mask_path),
                "--prompt", "red glasses", "--out", str(tmp_path / "result"),
                "--config", tiny_config,
            ],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "result_edit.png").exists()
        assert (tmp_path / "result_decoupled.png").exists()

    def test_missing_input_exit_code(self, runner, tiny_config, tmp_path):
        result = runner.invoke(
            main,
            [
                "edit", "--image", str(tmp_path / "no.png"), "--mask", str(tmp_path / "no.png"),
                "--prompt", "red glasses", "--out", str(tmp_path / "o"),
                "--config", tiny_config,
            ],
        )
        assert result.exit_code == EXIT_MISSING_ARTIFACT


class TestServe:
    def test_missing_checkpoint(self, runner, tiny_config, tmp_path):
        result = runner.invoke(
            main,
            ["serve", "--checkpoint", str(tmp_path / "none.pt"), "--config", tiny_config],
        )
        assert result.exit_code == EXIT_MISSING_ARTIFACT


class TestPrepareData:
    def test_empty_corpus(self, runner, tiny_config, tmp_path):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        result = runner.invoke(
            main,
            [
                "prepare-data", "--corpus", str(corpus),
                "--out", str(tmp_path / "manifest.jsonl"), "--config", tiny_config,
            ],
        )
        assert result.exit_code == EXIT_MISSING_ARTIFACT

    def test_end_to_end(self, runner, tiny_config, tmp_path, bundle):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        g = torch.Generator().manual_seed(0)
        annotations = {}
        for i in range(3):
            w = 0.3 * torch.randn(1, 3, 512, generator=g)
            w[0, 0, 0] = 2.0
            img = bundle.generator.synthesize(w)[0]
            arr = (img.numpy() * 255).round().astype(np.uint8)
            Image.fromarray(np.moveaxis(arr, 0, -1)).save(corpus / f"g{i}.png")
            annotations[f"g{i}.png"] = True
            w2 = 0.3 * torch.randn(1, 3, 512, generator=g)
            w2[0, 0, 0] = -3.0
            img2 = bundle.generator.synthesize(w2)[0]
            arr2 = (img2.numpy() * 255).round().astype(np.uint8)
            Image.fromarray(np.moveaxis(arr2, 0, -1)).save(corpus / f"p{i}.png")
            annotations[f"p{i}.png"] = False
        ann_path = tmp_path / "annotations.json"
        ann_path.write_text(json.dumps(annotations))
        out = tmp_path / "manifest.jsonl"
        result = runner.invoke(
            main,
            [
                "prepare-data", "--corpus", str(corpus), "--out", str(out),
                "--config", tiny_config, "--annotations", str(ann_path),
            ],
        )
        assert result.exit_code == 0, result.output
        assert out.exists() and "wrote" in result.output
