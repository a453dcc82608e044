"""Pose and attribute transferred person image generation."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import multimodal_similarity_loss, project_text, text_to_visual_attention
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .core import Pose
from .losses import adversarial_d_loss, adversarial_g_loss, masked_l1
from .pose_prior import BasicPoseSet, heatmap_to_keypoints, pose_mask, render_heatmap
from .stage1 import Stage1System, TrainResult, TrainingDivergedError, _dump_nan_batch, predict_orientation, write_curves
from .text import OutOfVocabularyError, TextEncoder, Vocab, is_fully_out_of_vocab, tokenize

log = logging.getLogger(__name__)


def _down(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(0.2))


def _conv(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(cin, cout, 3, stride=1, padding=1), nn.LeakyReLU(0.2))


class PyramidEncoder(nn.Module):
    """Stack of stride-2 conv blocks returning feature maps deepest-first.

    Scale 1 is the smallest (most downsampled) map; scale m is the first
    block's output at half resolution.
    """

    def __init__(self, in_channels: int, base: int, num_scales: int):
        super().__init__()
        blocks = []
        cin = in_channels
        for k in range(num_scales):
            cout = base * 2 ** k
            blocks.append(_down(cin, cout))
            cin = cout
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        h = x
        for block in self.blocks:
            h = block(h)
            feats.append(h)
        return feats[::-1]  # deepest scale first


class AttentionalUpsampler(nn.Module):
    """Recursive decoder: concat attended text, pose features, and the previous
    state, convolve, then 2x nearest-neighbor upsample."""

    def __init__(self, scale_channels: list[int], base: int):
        super().__init__()
        m = len(scale_channels)
        blocks = []
        for i in range(m):
            li = scale_channels[i]
            cout = scale_channels[i + 1] if i + 1 < m else base
            cin = 2 * li + (scale_channels[i] if i > 0 else 0)
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(cin, cout, 3, stride=1, padding=1),
                    nn.LeakyReLU(0.2),
                    nn.Upsample(scale_factor=2, mode="nearest"),
                )
            )
        self.blocks = nn.ModuleList(blocks)

    def step(self, index: int, attended: torch.Tensor, pose_feat: torch.Tensor,
             prev: torch.Tensor | None) -> torch.Tensor:
        """One upsampling stage. ``index`` is 0-based; ``prev`` must be absent
        exactly at the deepest scale."""
        if index == 0 and prev is not None:
            raise ValueError("first upsampling stage takes no previous state")
        if index > 0 and prev is None:
            raise ValueError(f"stage {index} requires the previous upsampling state")
        if attended.shape != pose_feat.shape:
            raise ValueError(
                f"attended {tuple(attended.shape)} and pose {tuple(pose_feat.shape)} disagree"
            )
        parts = [attended, pose_feat]
        if prev is not None:
            if prev.shape[2:] != attended.shape[2:]:
                raise ValueError(
                    f"previous state {tuple(prev.shape)} misaligned with scale {tuple(attended.shape)}"
                )
            parts.append(prev)
        return self.blocks[index](torch.cat(parts, dim=1))


class ImageGenerator(nn.Module):
    """Source image + target pose + caption -> pose/attribute transferred image."""

    def __init__(self, config: TrainConfig):
        super().__init__()
        self.config = config
        chans = config.scale_channels()
        base = config.base_channels
        feat = config.text_feat_dim
        self.image_encoder = PyramidEncoder(3, base, config.num_scales)
        self.pose_encoder = PyramidEncoder(config.num_joints, base, config.num_scales)
        self.word_proj = nn.ModuleList(nn.Linear(feat, c, bias=False) for c in chans)
        self.region_proj = nn.ModuleList(nn.Linear(c, feat, bias=False) for c in chans)
        self.upsampler = AttentionalUpsampler(chans, base)
        self.head = nn.Sequential(_conv(base, base), nn.Conv2d(base, 3, 3, stride=1, padding=1))

    def attended_text(self, visual: list[torch.Tensor], word_feats: torch.Tensor,
                      lengths: torch.Tensor) -> list[torch.Tensor]:
        """Per-scale word-aggregated context maps for a batch."""
        out = []
        for i, v in enumerate(visual):
            proj = self.word_proj[i].weight  # scale_dim x feat_dim
            zs = [
                text_to_visual_attention(project_text(word_feats[b], proj), v[b], int(lengths[b]))
                for b in range(v.shape[0])
            ]
            out.append(torch.stack(zs))
        return out

    def region_pyramids(self, images: torch.Tensor) -> list[list[torch.Tensor]]:
        """Per-image, per-scale region features projected into the word space."""
        visual = self.image_encoder(images)
        batch = images.shape[0]
        pyramids: list[list[torch.Tensor]] = [[] for _ in range(batch)]
        for i, v in enumerate(visual):
            proj = self.region_proj[i].weight  # feat_dim x scale_dim
            flat = v.reshape(v.shape[0], v.shape[1], -1)
            for b in range(batch):
                pyramids[b].append(proj @ flat[b])
        return pyramids

    def forward(self, image: torch.Tensor, heatmap: torch.Tensor,
                word_feats: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        visual = self.image_encoder(image)
        pose_feats = self.pose_encoder(heatmap)
        attended = self.attended_text(visual, word_feats, lengths)
        state = None
        for i in range(self.config.num_scales):
            state = self.upsampler.step(i, attended[i], pose_feats[i], state)
        return torch.tanh(self.head(state))


class ImageDiscriminator(nn.Module):
    """Shared conv trunk with text-, pose-, and jointly-conditioned heads."""

    def __init__(self, config: TrainConfig):
        super().__init__()
        base = config.base_channels
        cond = config.cond_channels
        self.num_scales = config.num_scales
        self.trunk = nn.Sequential(
            _down(3, base), _down(base, 2 * base), _down(2 * base, 4 * base)
        )
        trunk_ch = 4 * base
        self.text_proj = nn.Linear(config.text_feat_dim, cond)
        self.pose_proj = nn.Conv2d(config.num_joints, cond, 1)
        self.head_text = self._head(trunk_ch + cond, base)
        self.head_pose = self._head(trunk_ch + cond, base)
        self.head_both = self._head(trunk_ch + 2 * cond, base)

    @staticmethod
    def _head(cin: int, base: int) -> nn.Sequential:
        return nn.Sequential(_conv(cin, 2 * base), nn.Conv2d(2 * base, 1, 1))

    @staticmethod
    def _mean_words(word_feats: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        n = word_feats.shape[2]
        mask = (torch.arange(n, device=word_feats.device)[None, :] < lengths[:, None]).to(word_feats.dtype)
        summed = (word_feats * mask[:, None, :]).sum(dim=2)
        return summed / lengths[:, None].to(word_feats.dtype)

    def forward(self, image: torch.Tensor, word_feats: torch.Tensor,
                lengths: torch.Tensor, heatmap: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        feat = self.trunk(image)
        h, w = feat.shape[2], feat.shape[3]
        text = self.text_proj(self._mean_words(word_feats, lengths))
        text = text[:, :, None, None].expand(-1, -1, h, w)
        pose = self.pose_proj(F.adaptive_avg_pool2d(heatmap, (h, w)))
        p_text = torch.sigmoid(self.head_text(torch.cat([feat, text], 1)).mean(dim=(1, 2, 3)))
        p_pose = torch.sigmoid(self.head_pose(torch.cat([feat, pose], 1)).mean(dim=(1, 2, 3)))
        p_both = torch.sigmoid(self.head_both(torch.cat([feat, text, pose], 1)).mean(dim=(1, 2, 3)))
        return p_text, p_pose, p_both


class Stage2System(nn.Module):
    def __init__(self, config: TrainConfig, vocab_size: int):
        super().__init__()
        self.config = config
        self.text_encoder = TextEncoder(vocab_size, config.embed_dim, config.text_feat_dim)
        self.generator = ImageGenerator(config)
        self.discriminator = ImageDiscriminator(config)

    def generator_parameters(self):
        yield from self.text_encoder.parameters()
        yield from self.generator.parameters()


def stage2_d_loss(
    disc: ImageDiscriminator,
    real: torch.Tensor,
    fake: torch.Tensor,
    word_feats: torch.Tensor,
    lengths: torch.Tensor,
    heatmap: torch.Tensor,
) -> torch.Tensor:
    """Three conditional real/fake pairs (text; pose; text+pose), summed."""
    real_probs = disc(real, word_feats, lengths, heatmap)
    fake_probs = disc(fake, word_feats, lengths, heatmap)
    total = None
    for pr, pf in zip(real_probs, fake_probs):
        term = adversarial_d_loss(pr, pf)
        total = term if total is None else total + term
    return total


def stage2_g_loss(
    system: Stage2System,
    fake: torch.Tensor,
    real_target: torch.Tensor,
    mask: torch.Tensor,
    word_feats: torch.Tensor,
    lengths: torch.Tensor,
    heatmap: torch.Tensor,
    recon_weight: float,
    match_weight: float,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Adversarial terms + weighted masked L1 + weighted batch matching loss.

    The matching loss runs on the generated images' own feature pyramids so
    the synthesized content is what gets aligned with the words.
    """
    probs = system.discriminator(fake, word_feats, lengths, heatmap)
    adv = None
    for p in probs:
        term = adversarial_g_loss(p)
        adv = term if adv is None else adv + term
    recon = masked_l1(fake, real_target, mask)
    match = multimodal_similarity_loss(
        system.generator.region_pyramids(fake), word_feats, [int(n) for n in lengths]
    )
    total = adv + recon_weight * recon + match_weight * match
    parts = {"g_adv": float(adv.detach()), "l1": float(recon.detach()), "match": float(match.detach())}
    return total, parts


def train_stage2(
    samples,
    pairs,
    config: TrainConfig,
    basics: BasicPoseSet,
    vocab: Vocab,
    out_dir: str | Path,
    stage1_ckpt: str | Path | None = None,
    steps: int | None = None,
) -> TrainResult:
    """Alternating D/G updates on same-identity (source, target) pairs.

    Training conditions on the ground-truth target pose; a frozen Stage-I
    checkpoint, when given, seeds the text encoder so both stages share one
    text representation lineage.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = config.steps_stage2 if steps is None else steps
    if not pairs:
        raise ValueError("no training pairs")
    torch.manual_seed(config.seed)
    system = Stage2System(config, vocab_size=len(vocab))
    if stage1_ckpt is not None and not config.split_text_encoders:
        payload, _ = load_checkpoint(stage1_ckpt, expect_kind="stage1")
        system.text_encoder.load_state_dict(payload["state"]["text_encoder"])

    by_id = {s.id: s for s in samples}
    src_imgs, tgt_imgs, tgt_hms, tgt_masks, token_ids = [], [], [], [], []
    for src_id, tgt_id in pairs:
        src, tgt = by_id[src_id], by_id[tgt_id]
        src_imgs.append(src.load_image(config.height, config.width))
        tgt_imgs.append(tgt.load_image(config.height, config.width))
        tgt_hms.append(render_heatmap(tgt.pose, config.heatmap_radius))
        tgt_masks.append(pose_mask(tgt.pose, config.mask_dilation))
        token_ids.append(tokenize(tgt.caption, vocab, config.max_words))
    src_imgs = torch.from_numpy(np.stack(src_imgs)).float()
    tgt_imgs = torch.from_numpy(np.stack(tgt_imgs)).float()
    tgt_hms = torch.from_numpy(np.stack(tgt_hms))
    tgt_masks = torch.from_numpy(np.stack(tgt_masks))
    ids_all = torch.from_numpy(np.stack([t.ids for t in token_ids]))
    lengths_all = torch.tensor([t.length for t in token_ids], dtype=torch.int64)

    opt_g = torch.optim.Adam(
        system.generator_parameters(), lr=config.lr_g, betas=(config.adam_beta1, config.adam_beta2)
    )
    opt_d = torch.optim.Adam(
        system.discriminator.parameters(), lr=config.lr_d, betas=(config.adam_beta1, config.adam_beta2)
    )

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(pairs))
    cursor = 0
    curves: list[tuple[int, str, float]] = []
    for step in range(1, steps + 1):
        if cursor + config.batch_size > len(order):
            order = rng.permutation(len(pairs))
            cursor = 0
        idx = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size

        src = src_imgs[idx]
        tgt = tgt_imgs[idx]
        hm = tgt_hms[idx]
        mask = tgt_masks[idx]
        ids = ids_all[idx]
        lengths = lengths_all[idx]

        word_feats, _ = system.text_encoder(ids)
        fake = system.generator(src, hm, word_feats, lengths)

        d_loss = stage2_d_loss(
            system.discriminator, tgt, fake.detach(), word_feats.detach(), lengths, hm
        )
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        g_loss, parts = stage2_g_loss(
            system, fake, tgt, mask, word_feats, lengths, hm,
            config.recon_weight, config.match_weight,
        )
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        if not (torch.isfinite(d_loss) and torch.isfinite(g_loss)):
            dump = _dump_nan_batch(out_dir, step, {"src": src, "tgt": tgt, "hm": hm, "ids": ids})
            raise TrainingDivergedError(f"non-finite loss at step {step}; batch dumped to {dump}")

        curves.append((step, "d_loss", float(d_loss.detach())))
        curves.append((step, "g_total", float(g_loss.detach())))
        for name, value in parts.items():
            curves.append((step, name, value))

    write_curves(out_dir / "curves_stage2.csv", curves)
    ckpt = save_checkpoint(
        out_dir / "stage2.pt",
        "stage2",
        {
            "text_encoder": system.text_encoder,
            "generator": system.generator,
            "discriminator": system.discriminator,
        },
        config,
        config.seed,
        extra={"vocab_size": len(vocab)},
    )

    with torch.no_grad():
        final_l1 = 0.0
        for start in range(0, len(pairs), config.batch_size):
            sl = slice(start, start + config.batch_size)
            word_feats, _ = system.text_encoder(ids_all[sl])
            fake = system.generator(src_imgs[sl], tgt_hms[sl], word_feats, lengths_all[sl])
            final_l1 += float(masked_l1(fake, tgt_imgs[sl], tgt_masks[sl])) * fake.shape[0]
        final_l1 /= len(pairs)
    log.info("stage2 done: masked L1 %.5f", final_l1)
    return TrainResult(checkpoint=ckpt, curves=curves, final={"masked_l1": final_l1})


def load_stage2(path: str | Path) -> tuple[Stage2System, TrainConfig, dict]:
    payload, sidecar = load_checkpoint(path, expect_kind="stage2")
    config = TrainConfig.from_dict(sidecar["config"])
    system = Stage2System(config, vocab_size=sidecar["extra"]["vocab_size"])
    system.text_encoder.load_state_dict(payload["state"]["text_encoder"])
    system.generator.load_state_dict(payload["state"]["generator"])
    system.discriminator.load_state_dict(payload["state"]["discriminator"])
    system.eval()
    return system, config, sidecar


def synthesize(
    image: np.ndarray,
    caption: str,
    stage1: Stage1System,
    stage2: Stage2System,
    basics: BasicPoseSet,
    vocab: Vocab,
) -> tuple[Pose, np.ndarray, int]:
    """Full inference chain: caption -> orientation -> pose -> image.

    Returns (inferred pose, generated 3xHxW image in [-1, 1], orientation index).
    """
    if is_fully_out_of_vocab(caption, vocab):
        raise OutOfVocabularyError(f"caption has no known words: {caption!r}")
    cfg = stage2.config
    seq = tokenize(caption, vocab, cfg.max_words)
    ids = torch.from_numpy(seq.ids[None, :].copy())
    lengths = torch.tensor([seq.length], dtype=torch.int64)
    with torch.no_grad():
        _, sent1 = stage1.text_encoder(ids)
        _, orient = predict_orientation(stage1.orient_net, sent1)
        o = int(orient[0])
        basic_hm = torch.from_numpy(
            render_heatmap(basics.poses[o], stage1.config.heatmap_radius)[None]
        )
        refined = stage1.generator(basic_hm, sent1)
        pose = heatmap_to_keypoints(refined[0].numpy())
        pose_hm = torch.from_numpy(render_heatmap(pose, cfg.heatmap_radius)[None])
        word_feats, _ = stage2.text_encoder(ids)
        img_in = torch.from_numpy(np.asarray(image, dtype=np.float32)[None])
        fake = stage2.generator(img_in, pose_hm, word_feats, lengths)
    return pose, fake[0].numpy(), o
