import json

import numpy as np
import pytest
import torch

from textpose.cli import build_parser, main
from textpose.config import TrainConfig
from textpose.core import normalize_pose
from textpose.pose_prior import BasicPoseSet

def run(args):
    return main([str(a) for a in args])


class TestParsing:
    def test_unknown_flag_exits_one(self, capsys):
        assert run(["fixture", "--out", "/tmp/x", "--bogus-flag", "3"]) == 1
        assert "bogus-flag" in capsys.readouterr().err

    def test_missing_file_exits_one(self, tmp_path, capsys):
        assert run(["cluster-poses", "--manifest", tmp_path / "nope.jsonl", "--out", tmp_path / "b.json"]) == 1
        err = capsys.readouterr().err
        assert "manifest" in err

    def test_help_enumerates_every_config_key(self, capsys):
        parser = build_parser()
        with pytest.raises(SystemExit):
            parser.parse_args(["train-stage1", "--help"])
        text = capsys.readouterr().out
        import dataclasses

        for f in dataclasses.fields(TrainConfig):
            assert "--" + f.name.replace("_", "-") in text
            assert f"default: {getattr(TrainConfig(), f.name)}" in text

    def test_config_file_overridden_by_flags(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("seed = 9\nheight = 64\nwidth = 32\n")
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run(["fixture", "--identities", 1, "--per-identity", 1,
                    "--out", out_a, "--config", cfg_file]) == 0
        assert run(["fixture", "--identities", 1, "--per-identity", 1,
                    "--out", out_b, "--config", cfg_file, "--height", 128, "--width", 64]) == 0
        rec_a = json.loads((out_a / "manifest.jsonl").read_text().splitlines()[0])
        rec_b = json.loads((out_b / "manifest.jsonl").read_text().splitlines()[0])
        assert max(xy[1] for xy in rec_a["pose"]) < 64
        assert max(xy[1] for xy in rec_b["pose"]) > 64

    def test_invalid_config_value_exits_one(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("height = tall\n")
        assert run(["fixture", "--out", tmp_path / "x", "--config", cfg_file]) == 1
        assert "height" in capsys.readouterr().err


class TestFixtureAndCluster:
    def test_k1_cluster_is_fixture_mean_pose(self, tmp_path):
        out = tmp_path / "fx"
        assert run(["fixture", "--identities", 3, "--per-identity", 2, "--out", out,
                    "--height", 32, "--width", 16]) == 0
        basics_path = tmp_path / "basics.json"
        assert run(["cluster-poses", "--manifest", out / "manifest.jsonl",
                    "--out", basics_path, "--num-basic-poses", 1,
                    "--height", 32, "--width", 16]) == 0
        basics = BasicPoseSet.from_json(basics_path.read_text())
        assert basics.k == 1
        from textpose.dataset import load_manifest

        samples = load_manifest(out / "manifest.jsonl", 18, (32, 16))
        vectors = np.stack([normalize_pose(s.pose) for s in samples])
        assert np.abs(normalize_pose(basics.poses[0]) - vectors.mean(axis=0)).max() < 1e-6


class TestInferCommand:
    def _flags(self, artifacts, out_dir, caption="a person in a red shirt"):
        ref = next((artifacts["manifest"].parent / "images").iterdir())
        return [
            "infer", "--image", ref, "--caption", caption,
            "--stage1", artifacts["stage1"], "--stage2", artifacts["stage2"],
            "--basics", artifacts["basics"], "--vocab", artifacts["vocab"],
            "--out-dir", out_dir,
        ]

    def test_untrained_random_checkpoints_run_end_to_end(self, tmp_path, tiny_config, tiny_dataset):
        # random-weight checkpoints still satisfy the shape contract
        from textpose.checkpoint import save_checkpoint
        from textpose.dataset import load_manifest
        from textpose.pose_prior import cluster_basic_poses
        from textpose.stage1 import Stage1System
        from textpose.stage2 import Stage2System
        from textpose.text import build_vocab

        manifest, samples = tiny_dataset
        cfg = tiny_config
        vocab = build_vocab([s.caption for s in samples])
        basics = cluster_basic_poses([s.pose for s in samples], cfg.num_basic_poses, 0,
                                     ids=[s.id for s in samples])
        torch.manual_seed(0)
        s1 = Stage1System(cfg, len(vocab))
        s2 = Stage2System(cfg, len(vocab))
        out = tmp_path / "art"
        save_checkpoint(out / "s1.pt", "stage1",
                        {"text_encoder": s1.text_encoder, "orient_net": s1.orient_net,
                         "generator": s1.generator, "discriminator": s1.discriminator},
                        cfg, 0, extra={"vocab_size": len(vocab)})
        save_checkpoint(out / "s2.pt", "stage2",
                        {"text_encoder": s2.text_encoder, "generator": s2.generator,
                         "discriminator": s2.discriminator},
                        cfg, 0, extra={"vocab_size": len(vocab)})
        (out / "basics.json").write_text(basics.to_json())
        (out / "vocab.json").write_text(vocab.to_json())
        ref = next((manifest.parent / "images").iterdir())
        code = run(["infer", "--image", ref, "--caption", samples[0].caption,
                    "--stage1", out / "s1.pt", "--stage2", out / "s2.pt",
                    "--basics", out / "basics.json", "--vocab", out / "vocab.json",
                    "--out-dir", tmp_path / "inf"])
        assert code == 0
        from PIL import Image

        img = Image.open(tmp_path / "inf" / "generated.png")
        assert img.size == (cfg.width, cfg.height)
        summary = json.loads((tmp_path / "inf" / "summary.json").read_text())
        assert len(summary["pose"]) == cfg.num_joints

    def test_rerun_byte_identical(self, tmp_path, tiny_artifacts):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(self._flags(tiny_artifacts, a)) == 0
        assert run(self._flags(tiny_artifacts, b)) == 0
        assert (a / "generated.png").read_bytes() == (b / "generated.png").read_bytes()
        assert (a / "pose.png").read_bytes() == (b / "pose.png").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


class TestEvalCommand:
    def test_report_schema(self, tmp_path, tiny_artifacts):
        report_path = tmp_path / "report.json"
        code = run([
            "eval", "--manifest", tiny_artifacts["manifest"],
            "--stage1", tiny_artifacts["stage1"], "--stage2", tiny_artifacts["stage2"],
            "--basics", tiny_artifacts["basics"], "--vocab", tiny_artifacts["vocab"],
            "--metrics", "vqa,ssim,is", "--max-pairs", 4, "--out", report_path,
        ])
        assert code == 0
        report = json.loads(report_path.read_text())
        for key in ("n", "t", "vqa_score", "ssim_mean", "is_mean", "is_std", "per_image"):
            assert key in report
        assert report["n"] >= 1
        assert report["vqa_score"] == report["t"] / report["n"]
        assert report["per_image"]

    def test_unknown_metric_exits_one(self, tmp_path, tiny_artifacts, capsys):
        code = run([
            "eval", "--manifest", tiny_artifacts["manifest"],
            "--stage1", tiny_artifacts["stage1"], "--stage2", tiny_artifacts["stage2"],
            "--basics", tiny_artifacts["basics"], "--vocab", tiny_artifacts["vocab"],
            "--metrics", "vqa,bogus", "--out", tmp_path / "r.json",
        ])
        assert code == 1
        assert "bogus" in capsys.readouterr().err


class TestTrainCommands:
    def test_train_stage1_then_stage2_pipeline(self, tmp_path):
        fx = tmp_path / "fx"
        assert run(["fixture", "--identities", 2, "--per-identity", 2, "--out", fx,
                    "--height", 32, "--width", 16, "--seed", 3]) == 0
        basics = tmp_path / "basics.json"
        assert run(["cluster-poses", "--manifest", fx / "manifest.jsonl", "--out", basics,
                    "--num-basic-poses", 2, "--height", 32, "--width", 16]) == 0
        flags = ["--height", 32, "--width", 16, "--num-basic-poses", 2,
                 "--base-channels", 4, "--cond-channels", 2, "--batch-size", 2,
                 "--text-feat-dim", 16, "--sent-feat-dim", 16, "--embed-dim", 8,
                 "--max-words", 16, "--steps-stage1", 4, "--steps-stage2", 4]
        s1 = tmp_path / "s1"
        assert run(["train-stage1", "--manifest", fx / "manifest.jsonl", "--basics", basics,
                    "--out-dir", s1, *flags]) == 0
        assert (s1 / "stage1.pt").exists() and (s1 / "vocab.json").exists()
        s2 = tmp_path / "s2"
        assert run(["train-stage2", "--manifest", fx / "manifest.jsonl", "--basics", basics,
                    "--out-dir", s2, "--stage1", s1 / "stage1.pt",
                    "--vocab", s1 / "vocab.json", *flags]) == 0
        assert (s2 / "stage2.pt").exists()
        assert (s2 / "curves_stage2.csv").read_text().startswith("step,loss_name,value")
