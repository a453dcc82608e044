import numpy as np
import pytest

from textpose.config import TrainConfig
from textpose.core import Pose
from textpose.dataset import (
    PHRASEBOOK,
    append_orientation_phrase,
    generate_synthetic_fixture,
    load_manifest,
    make_pairs,
)
from textpose.pose_prior import cluster_basic_poses
from textpose.stage1 import train_stage1
from textpose.stage2 import train_stage2
from textpose.text import build_vocab


def random_pose(rng: np.random.Generator, num_joints: int = 18, frame=(128, 64),
                p_invisible: float = 0.0) -> Pose:
    h, w = frame
    joints = np.empty((num_joints, 3))
    joints[:, 0] = rng.uniform(0, w - 1, num_joints)
    joints[:, 1] = rng.uniform(0, h - 1, num_joints)
    joints[:, 2] = (rng.random(num_joints) >= p_invisible).astype(float)
    return Pose(joints=joints, frame=frame)


@pytest.fixture(scope="session")
def tiny_config():
    # smallest config that exercises every component quickly
    return TrainConfig(
        num_basic_poses=4,
        num_scales=2,
        height=32,
        width=16,
        text_feat_dim=32,
        sent_feat_dim=32,
        embed_dim=16,
        max_words=16,
        heatmap_radius=2.0,
        mask_dilation=3.0,
        base_channels=8,
        cond_channels=4,
        batch_size=2,
        seed=11,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_config):
    out = tmp_path_factory.mktemp("tiny_fixture")
    manifest = generate_synthetic_fixture(
        4, 2, seed=tiny_config.seed, out_dir=out,
        height=tiny_config.height, width=tiny_config.width,
    )
    samples = load_manifest(manifest, tiny_config.num_joints, (tiny_config.height, tiny_config.width))
    return manifest, samples


@pytest.fixture(scope="session")
def tiny_artifacts(tmp_path_factory, tiny_config, tiny_dataset):
    """A briefly trained end-to-end bundle for CLI/service tests."""
    manifest, samples = tiny_dataset
    out = tmp_path_factory.mktemp("tiny_artifacts")
    basics = cluster_basic_poses(
        [s.pose for s in samples], tiny_config.num_basic_poses, tiny_config.seed,
        ids=[s.id for s in samples],
    )
    basics_path = out / "basics.json"
    basics_path.write_text(basics.to_json())
    samples = [append_orientation_phrase(s, basics, PHRASEBOOK) for s in samples]
    vocab = build_vocab([s.caption for s in samples])
    vocab_path = out / "vocab.json"
    vocab_path.write_text(vocab.to_json())
    r1 = train_stage1(samples, tiny_config, basics, vocab, out, steps=30)
    pairs = make_pairs(samples)
    r2 = train_stage2(samples, pairs.pairs, tiny_config, basics, vocab, out,
                      stage1_ckpt=r1.checkpoint, steps=30)
    return {
        "manifest": manifest,
        "out": out,
        "stage1": r1.checkpoint,
        "stage2": r2.checkpoint,
        "basics": basics_path,
        "vocab": vocab_path,
        "config": tiny_config,
    }
