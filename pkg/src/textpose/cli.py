"""Command-line entry point: fixtures, clustering, training, inference, eval, serve."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError
from .config import ConfigError, TrainConfig, load_config_file
from .core import TextPoseError, image_to_png_bytes, resize_image
from .dataset import (
    PHRASEBOOK,
    ManifestError,
    append_orientation_phrase,
    generate_synthetic_fixture,
    load_manifest,
    make_pairs,
)
from .metrics import (
    PaletteShirtClassifier,
    RegisteredPoseOracle,
    default_color_oracle,
    edited_caption,
    inception_score,
    make_color_probes,
    ssim,
    vqa_perceptual_score,
)
from .pipeline import load_bundle
from .pose_prior import BasicPoseSet, cluster_basic_poses, pose_mask
from .stage1 import TrainingDivergedError, train_stage1
from .stage2 import train_stage2
from .text import Vocab, build_vocab

VALIDATION_ERRORS = (ConfigError, ManifestError, CheckpointError, FileNotFoundError, ValueError)


class CliError(TextPoseError):
    pass


class Parser(argparse.ArgumentParser):
    # exit code 1 (not argparse's default 2) on bad flags, naming the problem
    def error(self, message):
        raise CliError(message)


def add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key = value config file; flags override it")
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        default = getattr(TrainConfig(), f.name)
        if isinstance(default, bool):
            parser.add_argument(
                flag, dest=f.name, action=argparse.BooleanOptionalAction,
                default=argparse.SUPPRESS, help=f"(default: {default})",
            )
        else:
            parser.add_argument(
                flag, dest=f.name, type=type(default),
                default=argparse.SUPPRESS, help=f"(default: {default})",
            )


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    names = {f.name for f in dataclasses.fields(TrainConfig)}
    for name in names:
        if hasattr(args, name):
            values[name] = getattr(args, name)
    return TrainConfig.from_dict(values)


def build_parser() -> Parser:
    parser = Parser(prog="textpose", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("fixture", help="generate the synthetic stick-figure dataset")
    p.add_argument("--identities", type=int, default=8)
    p.add_argument("--per-identity", type=int, default=2)
    p.add_argument("--out", required=True)
    add_config_args(p)

    p = sub.add_parser("cluster-poses", help="build the basic pose set by k-means")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    add_config_args(p)

    p = sub.add_parser("train-stage1", help="train the text guided pose generator")
    p.add_argument("--manifest", required=True)
    p.add_argument("--basics", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--vocab", help="reuse an existing vocab file")
    add_config_args(p)

    p = sub.add_parser("train-stage2", help="train the person image generator")
    p.add_argument("--manifest", required=True)
    p.add_argument("--basics", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stage1", help="stage-1 checkpoint seeding the text encoder")
    p.add_argument("--vocab", help="reuse an existing vocab file")
    add_config_args(p)

    p = sub.add_parser("infer", help="synthesize a pose and image from a caption")
    p.add_argument("--image", required=True)
    p.add_argument("--caption", required=True)
    p.add_argument("--stage1", required=True)
    p.add_argument("--stage2", required=True)
    p.add_argument("--basics", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out-dir", required=True)
    add_config_args(p)

    p = sub.add_parser("eval", help="evaluate checkpoints on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stage1", required=True)
    p.add_argument("--stage2", required=True)
    p.add_argument("--basics", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--metrics", default="vqa,ssim,is", help="comma list: vqa,ssim,is")
    p.add_argument("--max-pairs", type=int, default=0, help="0 = all pairs")
    p.add_argument("--out", required=True)
    add_config_args(p)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--stage1", required=True)
    p.add_argument("--stage2", required=True)
    p.add_argument("--basics", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-concurrency", type=int, default=4)
    add_config_args(p)

    return parser


def _load_samples(args, config: TrainConfig):
    return load_manifest(args.manifest, config.num_joints, (config.height, config.width))


def _prepare_vocab(args, samples, config: TrainConfig, out_dir: Path) -> Vocab:
    if getattr(args, "vocab", None):
        return Vocab.from_json(Path(args.vocab).read_text())
    vocab = build_vocab([s.caption for s in samples], config.vocab_min_freq)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "vocab.json").write_text(vocab.to_json())
    return vocab


def cmd_fixture(args) -> int:
    config = resolve_config(args)
    manifest = generate_synthetic_fixture(
        args.identities, args.per_identity, config.seed, args.out,
        height=config.height, width=config.width,
    )
    print(manifest)
    return 0


def cmd_cluster_poses(args) -> int:
    config = resolve_config(args)
    samples = _load_samples(args, config)
    basics = cluster_basic_poses(
        [s.pose for s in samples], config.num_basic_poses, config.seed, ids=[s.id for s in samples]
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(basics.to_json())
    print(out)
    return 0


def cmd_train_stage1(args) -> int:
    config = resolve_config(args)
    samples = _load_samples(args, config)
    basics = BasicPoseSet.from_json(Path(args.basics).read_text())
    samples = [append_orientation_phrase(s, basics, PHRASEBOOK) for s in samples]
    out_dir = Path(args.out_dir)
    vocab = _prepare_vocab(args, samples, config, out_dir)
    result = train_stage1(samples, config, basics, vocab, out_dir)
    print(json.dumps({"checkpoint": str(result.checkpoint), **result.final}))
    return 0


def cmd_train_stage2(args) -> int:
    config = resolve_config(args)
    samples = _load_samples(args, config)
    basics = BasicPoseSet.from_json(Path(args.basics).read_text())
    samples = [append_orientation_phrase(s, basics, PHRASEBOOK) for s in samples]
    out_dir = Path(args.out_dir)
    vocab = _prepare_vocab(args, samples, config, out_dir)
    pairs = make_pairs(samples)
    result = train_stage2(
        samples, pairs.pairs, config, basics, vocab, out_dir, stage1_ckpt=args.stage1
    )
    print(json.dumps({"checkpoint": str(result.checkpoint), **result.final}))
    return 0


def cmd_infer(args) -> int:
    bundle = load_bundle(args.stage1, args.stage2, args.basics, args.vocab)
    cfg = bundle.config
    image = resize_image(Path(args.image).read_bytes(), cfg.height, cfg.width)
    pose, fake, orientation = bundle.synthesize(image, args.caption)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "generated.png").write_bytes(image_to_png_bytes(fake))
    skeleton = pose_mask(pose, 1.5)[0]
    (out_dir / "pose.png").write_bytes(
        image_to_png_bytes(np.stack([skeleton * 2.0 - 1.0] * 3))
    )
    summary = {
        "version": 1,
        "caption": args.caption,
        "orientation": orientation,
        "pose": pose.to_list(),
        "outputs": ["generated.png", "pose.png"],
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(out_dir / "summary.json")
    return 0


def cmd_eval(args) -> int:
    config = resolve_config(args)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(metrics) - {"vqa", "ssim", "is"}
    if unknown:
        raise ConfigError(f"unknown metrics: {sorted(unknown)}")
    bundle = load_bundle(args.stage1, args.stage2, args.basics, args.vocab)
    cfg = bundle.config  # data geometry is pinned by the checkpoint, not flags
    samples = load_manifest(args.manifest, cfg.num_joints, (cfg.height, cfg.width))
    samples = [append_orientation_phrase(s, bundle.basics, PHRASEBOOK) for s in samples]
    by_id = {s.id: s for s in samples}
    pairs = make_pairs(samples).pairs
    if args.max_pairs:
        pairs = pairs[: args.max_pairs]

    vqa_entries = []
    oracle = RegisteredPoseOracle(cfg.mask_dilation)
    classifier = PaletteShirtClassifier(dilation=cfg.mask_dilation)
    ssim_vals: list[float] = []
    is_images: list[np.ndarray] = []
    per_image = []
    for k, (src_id, tgt_id) in enumerate(pairs):
        src, tgt = by_id[src_id], by_id[tgt_id]
        src_img = src.load_image(cfg.height, cfg.width)
        record: dict = {"pair": [src_id, tgt_id]}
        if "vqa" in metrics:
            probes = make_color_probes(tgt.caption, seed=config.seed + k)
            if probes:
                caption = edited_caption(tgt.caption, probes)
                pose, fake, _ = bundle.synthesize(src_img, caption)
                oracle.register(fake, pose)
                vqa_entries.append((fake, probes))
                answers = [
                    {
                        "part": p.part,
                        "answer": p.answer,
                        "predicted": default_color_oracle(fake, p.question, pose, cfg.mask_dilation),
                    }
                    for p in probes
                ]
                for a in answers:
                    a["correct"] = a["predicted"] == a["answer"]
                record["vqa"] = {"probes": answers, "all_correct": all(a["correct"] for a in answers)}
        if "ssim" in metrics or "is" in metrics:
            fake_pt = bundle.transfer_pose(src_img, tgt.caption, tgt.pose)
            if "ssim" in metrics:
                value = ssim(fake_pt, tgt.load_image(cfg.height, cfg.width))
                ssim_vals.append(value)
                record["ssim"] = value
            if "is" in metrics:
                classifier.register(fake_pt, tgt.pose)
                is_images.append(fake_pt)
        per_image.append(record)

    report: dict = {
        "version": 1,
        "n": len(vqa_entries),
        "t": sum(1 for r in per_image if r.get("vqa", {}).get("all_correct")),
        "vqa_score": None,
        "ssim_mean": None,
        "is_mean": None,
        "is_std": None,
        "per_image": per_image,
    }
    if "vqa" in metrics and vqa_entries:
        report["vqa_score"] = vqa_perceptual_score(vqa_entries, oracle)
    if "ssim" in metrics and ssim_vals:
        report["ssim_mean"] = float(np.mean(ssim_vals))
    if "is" in metrics and is_images:
        mean, std = inception_score(is_images, classifier, splits=min(10, len(is_images)))
        report["is_mean"] = mean
        report["is_std"] = std
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True))
    print(out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bundle = load_bundle(args.stage1, args.stage2, args.basics, args.vocab)
    app = create_app(bundle, max_concurrency=args.max_concurrency)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


COMMANDS = {
    "fixture": cmd_fixture,
    "cluster-poses": cmd_cluster_poses,
    "train-stage1": cmd_train_stage1,
    "train-stage2": cmd_train_stage2,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 2
    except TextPoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
