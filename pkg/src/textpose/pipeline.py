"""Loading trained artifacts into a ready-to-serve inference bundle."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .core import Pose
from .pose_prior import BasicPoseSet, render_heatmap
from .stage1 import Stage1System, load_stage1
from .stage2 import Stage2System, load_stage2, synthesize
from .text import Vocab, tokenize


@dataclass
class SynthesisBundle:
    stage1: Stage1System
    stage2: Stage2System
    basics: BasicPoseSet
    vocab: Vocab
    config: TrainConfig
    model_version: str

    def synthesize(self, image: np.ndarray, caption: str) -> tuple[Pose, np.ndarray, int]:
        return synthesize(image, caption, self.stage1, self.stage2, self.basics, self.vocab)

    def transfer_pose(self, image: np.ndarray, caption: str, pose: Pose) -> np.ndarray:
        """Stage-II only: synthesize with a known target pose."""
        cfg = self.config
        seq = tokenize(caption, self.vocab, cfg.max_words)
        ids = torch.from_numpy(seq.ids[None, :].copy())
        lengths = torch.tensor([seq.length], dtype=torch.int64)
        with torch.no_grad():
            word_feats, _ = self.stage2.text_encoder(ids)
            hm = torch.from_numpy(render_heatmap(pose, cfg.heatmap_radius)[None])
            img_in = torch.from_numpy(np.asarray(image, dtype=np.float32)[None])
            fake = self.stage2.generator(img_in, hm, word_feats, lengths)
        return fake[0].numpy()


def load_bundle(
    stage1_path: str | Path,
    stage2_path: str | Path,
    basics_path: str | Path,
    vocab_path: str | Path,
) -> SynthesisBundle:
    stage1, _, _ = load_stage1(stage1_path)
    stage2, config, sidecar2 = load_stage2(stage2_path)
    basics = BasicPoseSet.from_json(Path(basics_path).read_text())
    vocab = Vocab.from_json(Path(vocab_path).read_text())
    return SynthesisBundle(
        stage1=stage1,
        stage2=stage2,
        basics=basics,
        vocab=vocab,
        config=config,
        model_version=sidecar2["sha256"],
    )
