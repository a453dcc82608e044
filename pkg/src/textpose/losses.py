"""Scalar loss formulas shared by both stages."""

from __future__ import annotations

import torch
import torch.nn.functional as F

PROB_EPS = 1e-7


def clamp_prob(p: torch.Tensor, eps: float = PROB_EPS) -> torch.Tensor:
    return p.clamp(eps, 1.0 - eps)


def adversarial_d_loss(p_real: torch.Tensor, p_fake: torch.Tensor) -> torch.Tensor:
    """-log D(real) - log(1 - D(fake)), batch-averaged, probabilities clamped."""
    p_real = clamp_prob(p_real)
    p_fake = clamp_prob(p_fake)
    return -(torch.log(p_real).mean() + torch.log(1.0 - p_fake).mean())


def adversarial_g_loss(p_fake: torch.Tensor) -> torch.Tensor:
    """-log D(fake), batch-averaged, probabilities clamped."""
    return -torch.log(clamp_prob(p_fake)).mean()


def mean_square_error(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean over all entries of the squared difference."""
    return ((a - b) ** 2).mean()


def orientation_cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Cross entropy between predicted orientation logits and true cluster index."""
    return F.cross_entropy(logits, labels)


def masked_l1(fake: torch.Tensor, real: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over all entries of |(fake - real) * mask| with the mask broadcast
    across channels. Normalizing by tensor size (not mask mass) keeps the
    reconstruction weight comparable across poses."""
    if fake.shape != real.shape:
        raise ValueError(f"shape mismatch: {tuple(fake.shape)} vs {tuple(real.shape)}")
    return ((fake - real) * mask).abs().mean()
