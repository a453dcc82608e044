"""Text guided pose generation: orientation selection, refinement GAN, training."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .core import TextPoseError
from .losses import (
    adversarial_d_loss,
    adversarial_g_loss,
    mean_square_error,
    orientation_cross_entropy,
)
from .pose_prior import BasicPoseSet, orientation_label, render_heatmap
from .text import TextEncoder, Vocab, tokenize

log = logging.getLogger(__name__)


class TrainingDivergedError(TextPoseError):
    pass


class OrientationNet(nn.Module):
    """Two fully connected layers mapping the sentence vector to K logits."""

    def __init__(self, sent_dim: int, k: int, hidden: int = 64):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(sent_dim, hidden), nn.ReLU(), nn.Linear(hidden, k))

    def forward(self, sent: torch.Tensor) -> torch.Tensor:
        return self.net(sent)


def predict_orientation(net: OrientationNet, sent: torch.Tensor) -> tuple[torch.Tensor, np.ndarray]:
    """Softmax probabilities and argmax index per batch row (ties: lowest index)."""
    logits = net(sent)
    probs = torch.softmax(logits, dim=1)
    idx = probs.detach().cpu().numpy().argmax(axis=1)
    return probs, idx


def _down(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(0.2))


def _conv(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(cin, cout, 3, stride=1, padding=1), nn.LeakyReLU(0.2))


class PoseGenerator(nn.Module):
    """Refines a basic-pose heatmap into a text-conditioned pose heatmap.

    Three stride-2 downsamples, sentence vector tiled into the bottleneck,
    three nearest-neighbor upsamples. The basic heatmap feeds the head both
    as features and as a fixed-scale logit bias, so the untrained generator
    already reproduces the basic pose and training learns joint adjustments;
    without that residual path the sparse positive pixels collapse the
    sigmoid head to all-zero output.
    """

    SKIP_LOGIT_SCALE = 4.0

    def __init__(self, num_joints: int, sent_dim: int, base: int = 32):
        super().__init__()
        b = base
        self.down1 = _down(num_joints, b)
        self.down2 = _down(b, 2 * b)
        self.down3 = _down(2 * b, 4 * b)
        self.text_proj = nn.Linear(sent_dim, b)
        self.fuse = _conv(4 * b + b, 4 * b)
        self.up3 = nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"), _conv(4 * b, 2 * b))
        self.up2 = nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"), _conv(2 * b + 2 * b, b))
        self.up1 = nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"), _conv(b + b, b))
        self.head = nn.Conv2d(b + num_joints, num_joints, 3, stride=1, padding=1)

    def forward(self, basic: torch.Tensor, sent: torch.Tensor) -> torch.Tensor:
        d1 = self.down1(basic)
        d2 = self.down2(d1)
        d3 = self.down3(d2)
        t = self.text_proj(sent)[:, :, None, None].expand(-1, -1, d3.shape[2], d3.shape[3])
        h = self.fuse(torch.cat([d3, t], dim=1))
        h = self.up3(h)
        h = self.up2(torch.cat([h, d2], dim=1))
        h = self.up1(torch.cat([h, d1], dim=1))
        logits = self.head(torch.cat([h, basic], dim=1))
        return torch.sigmoid(logits + self.SKIP_LOGIT_SCALE * (2.0 * basic - 1.0))


class PoseDiscriminator(nn.Module):
    """Scores heatmap realism conditioned on the sentence vector."""

    def __init__(self, num_joints: int, sent_dim: int, base: int = 32, cond: int = 16):
        super().__init__()
        b = base
        self.trunk = nn.Sequential(_down(num_joints, b), _down(b, 2 * b))
        self.text_proj = nn.Linear(sent_dim, cond)
        self.score = nn.Sequential(_conv(2 * b + cond, 2 * b), _down(2 * b, 2 * b), nn.Conv2d(2 * b, 1, 1))

    def forward(self, heatmap: torch.Tensor, sent: torch.Tensor) -> torch.Tensor:
        h = self.trunk(heatmap)
        t = self.text_proj(sent)[:, :, None, None].expand(-1, -1, h.shape[2], h.shape[3])
        out = self.score(torch.cat([h, t], dim=1))
        return torch.sigmoid(out.mean(dim=(1, 2, 3)))


class Stage1System(nn.Module):
    """Text encoder + orientation net + pose generator/discriminator."""

    def __init__(self, config: TrainConfig, vocab_size: int):
        super().__init__()
        self.config = config
        self.text_encoder = TextEncoder(vocab_size, config.embed_dim, config.text_feat_dim)
        self.orient_net = OrientationNet(config.sent_feat_dim, config.num_basic_poses)
        self.generator = PoseGenerator(config.num_joints, config.sent_feat_dim, config.base_channels)
        self.discriminator = PoseDiscriminator(
            config.num_joints, config.sent_feat_dim, config.base_channels, config.cond_channels
        )

    def generate_pose(self, basic: torch.Tensor, sent: torch.Tensor) -> torch.Tensor:
        if basic.shape[1] != self.config.num_joints:
            raise ValueError(f"expected {self.config.num_joints} heatmap channels, got {basic.shape[1]}")
        return self.generator(basic, sent)

    def generator_parameters(self):
        yield from self.text_encoder.parameters()
        yield from self.orient_net.parameters()
        yield from self.generator.parameters()


def stage1_d_loss(
    disc: PoseDiscriminator, real: torch.Tensor, fake: torch.Tensor, sent: torch.Tensor
) -> torch.Tensor:
    return adversarial_d_loss(disc(real, sent), disc(fake, sent))


def stage1_g_loss(
    disc: PoseDiscriminator,
    fake: torch.Tensor,
    real: torch.Tensor,
    sent: torch.Tensor,
    orient_logits: torch.Tensor,
    orient_labels: torch.Tensor,
    mse_weight: float,
    orient_weight: float,
) -> tuple[torch.Tensor, dict[str, float]]:
    adv = adversarial_g_loss(disc(fake, sent))
    mse = mean_square_error(fake, real)
    ce = orientation_cross_entropy(orient_logits, orient_labels)
    total = adv + mse_weight * mse + orient_weight * ce
    parts = {"g_adv": float(adv.detach()), "mse": float(mse.detach()), "orient_ce": float(ce.detach())}
    return total, parts


@dataclass
class TrainResult:
    checkpoint: Path
    curves: list[tuple[int, str, float]] = field(default_factory=list)
    final: dict = field(default_factory=dict)


def write_curves(path: Path, curves: list[tuple[int, str, float]]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss_name", "value"])
        for step, name, value in curves:
            writer.writerow([step, name, f"{value:.10g}"])


def _dump_nan_batch(out_dir: Path, step: int, tensors: dict[str, torch.Tensor]) -> Path:
    dump = out_dir / f"nan_batch_step{step}.npz"
    np.savez(dump, **{k: v.detach().cpu().numpy() for k, v in tensors.items()})
    return dump


def train_stage1(
    samples,
    config: TrainConfig,
    basics: BasicPoseSet,
    vocab: Vocab,
    out_dir: str | Path,
    steps: int | None = None,
) -> TrainResult:
    """Alternating D/G updates (1:1) of the pose GAN on (pose, caption) pairs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = config.steps_stage1 if steps is None else steps
    torch.manual_seed(config.seed)
    system = Stage1System(config, vocab_size=len(vocab))

    token_ids = [tokenize(s.caption, vocab, config.max_words) for s in samples]
    labels = torch.tensor(
        [orientation_label(s.pose, basics) for s in samples], dtype=torch.int64
    )
    target_hm = torch.from_numpy(
        np.stack([render_heatmap(s.pose, config.heatmap_radius) for s in samples])
    )
    basic_hm_bank = torch.from_numpy(
        np.stack([render_heatmap(p, config.heatmap_radius) for p in basics.poses])
    )
    basic_hm = basic_hm_bank[labels]

    opt_g = torch.optim.Adam(
        system.generator_parameters(), lr=config.lr_g, betas=(config.adam_beta1, config.adam_beta2)
    )
    # an equal-rate D1 overwhelms the weighted refinement term at desk scale
    opt_d = torch.optim.Adam(
        system.discriminator.parameters(), lr=config.lr_d_stage1,
        betas=(config.adam_beta1, config.adam_beta2),
    )

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(samples))
    cursor = 0
    curves: list[tuple[int, str, float]] = []
    for step in range(1, steps + 1):
        if cursor + config.batch_size > len(order):
            order = rng.permutation(len(samples))
            cursor = 0
        idx = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size

        seqs = [token_ids[i] for i in idx]
        real = target_hm[idx]
        basic = basic_hm[idx]
        batch_labels = labels[idx]

        ids = torch.from_numpy(np.stack([s.ids for s in seqs]))
        _, sent = system.text_encoder(ids)
        fake = system.generator(basic, sent)

        d_loss = stage1_d_loss(system.discriminator, real, fake.detach(), sent.detach())
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        orient_logits = system.orient_net(sent)
        g_loss, parts = stage1_g_loss(
            system.discriminator, fake, real, sent, orient_logits, batch_labels,
            config.mse_weight, config.orient_weight,
        )
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        if not (torch.isfinite(d_loss) and torch.isfinite(g_loss)):
            dump = _dump_nan_batch(out_dir, step, {"real": real, "basic": basic, "ids": ids})
            raise TrainingDivergedError(f"non-finite loss at step {step}; batch dumped to {dump}")

        curves.append((step, "d_loss", float(d_loss.detach())))
        curves.append((step, "g_total", float(g_loss.detach())))
        for name, value in parts.items():
            curves.append((step, name, value))

    write_curves(out_dir / "curves_stage1.csv", curves)
    ckpt = save_checkpoint(
        out_dir / "stage1.pt",
        "stage1",
        {
            "text_encoder": system.text_encoder,
            "orient_net": system.orient_net,
            "generator": system.generator,
            "discriminator": system.discriminator,
        },
        config,
        config.seed,
        extra={"vocab_size": len(vocab)},
    )

    with torch.no_grad():
        ids = torch.from_numpy(np.stack([s.ids for s in token_ids]))
        _, sent = system.text_encoder(ids)
        _, pred = predict_orientation(system.orient_net, sent)
    accuracy = float((pred == labels.numpy()).mean())
    final_mse = _final_mse(system, token_ids, basic_hm, target_hm)
    log.info("stage1 done: orientation accuracy %.3f, mse %.5f", accuracy, final_mse)
    return TrainResult(
        checkpoint=ckpt,
        curves=curves,
        final={"orientation_accuracy": accuracy, "mse": final_mse},
    )


def _final_mse(system: Stage1System, token_ids, basic_hm, target_hm) -> float:
    with torch.no_grad():
        ids = torch.from_numpy(np.stack([s.ids for s in token_ids]))
        _, sent = system.text_encoder(ids)
        fake = system.generator(basic_hm, sent)
        return float(mean_square_error(fake, target_hm))


def load_stage1(path: str | Path) -> tuple[Stage1System, TrainConfig, dict]:
    payload, sidecar = load_checkpoint(path, expect_kind="stage1")
    config = TrainConfig.from_dict(sidecar["config"])
    system = Stage1System(config, vocab_size=sidecar["extra"]["vocab_size"])
    system.text_encoder.load_state_dict(payload["state"]["text_encoder"])
    system.orient_net.load_state_dict(payload["state"]["orient_net"])
    system.generator.load_state_dict(payload["state"]["generator"])
    system.discriminator.load_state_dict(payload["state"]["discriminator"])
    system.eval()
    return system, config, sidecar
