"""Word/region attention linear algebra and the batch matching loss.

Every function here is pure tensor math (no modules, no state) so each one
can be checked against a brute-force scalar oracle. Shapes follow the
convention: word features are L x N (feature dim x words), visual features
are C x H x W, region features are L x R with R = H*W.
"""

from __future__ import annotations

import torch

NEG_INF = float("-inf")


def project_text(word_feats: torch.Tensor, proj: torch.Tensor) -> torch.Tensor:
    """Linear map of word features into a visual feature space: (C x L) @ (L x N)."""
    if proj.shape[1] != word_feats.shape[0]:
        raise ValueError(f"projection {tuple(proj.shape)} does not match words {tuple(word_feats.shape)}")
    return proj @ word_feats


def masked_word_softmax(scores: torch.Tensor, n_real: int) -> torch.Tensor:
    """Softmax over the word axis (rows) of an N x R score matrix, with pad
    words (rows >= n_real) masked to -inf first."""
    if n_real < 1:
        raise ValueError("need at least one real word")
    n = scores.shape[0]
    if n_real < n:
        mask = torch.zeros(n, 1, dtype=scores.dtype, device=scores.device)
        mask[n_real:] = NEG_INF
        scores = scores + mask
    return torch.softmax(scores, dim=0)


def region_softmax(scores: torch.Tensor) -> torch.Tensor:
    """Softmax over the region axis (rows) of an R x N score matrix."""
    return torch.softmax(scores, dim=0)


def text_to_visual_attention(
    proj_words: torch.Tensor, visual: torch.Tensor, n_real: int
) -> torch.Tensor:
    """Word-aggregated visual context.

    For each spatial location, softmax over the (real) words of the
    word-region match scores, then mix the projected word vectors with those
    weights. Pad words are masked out before the softmax.
    """
    c, h, w = visual.shape
    if proj_words.shape[0] != c:
        raise ValueError("projected words and visual feature dims disagree")
    flat = visual.reshape(c, h * w)  # C x R
    scores = proj_words.transpose(0, 1) @ flat  # N x R
    weights = masked_word_softmax(scores, n_real)
    mixed = proj_words @ weights  # C x R
    return mixed.reshape(c, h, w)


def visual_to_text_attention(
    region_feats: torch.Tensor, word_feats: torch.Tensor
) -> torch.Tensor:
    """Region-aggregated word context.

    ``region_feats`` is L x R (regions already projected into the word
    space). For each word, softmax the region scores over regions, then mix
    the region vectors: column j is the visual context of word j.
    """
    if region_feats.shape[0] != word_feats.shape[0]:
        raise ValueError("region and word feature dims disagree")
    scores = region_feats.transpose(0, 1) @ word_feats  # R x N
    weights = region_softmax(scores)
    return region_feats @ weights  # L x N


def cosine_similarity(a: torch.Tensor, b: torch.Tensor, dim: int = 0) -> torch.Tensor:
    """Cosine similarity with a zero-vector guard (zero norm -> similarity 0)."""
    na = a.norm(dim=dim)
    nb = b.norm(dim=dim)
    dot = (a * b).sum(dim=dim)
    denom = na * nb
    safe = torch.where(denom > 0, denom, torch.ones_like(denom))
    return torch.where(denom > 0, dot / safe, torch.zeros_like(dot))


def visual_text_distance(
    context_per_scale: list[torch.Tensor], word_feats: torch.Tensor, n_real: int
) -> torch.Tensor:
    """Multi-scale image/text match score.

    Sum over scales of log(sum over real words of exp(cosine(context_j, word_j))).
    """
    if not context_per_scale:
        raise ValueError("need at least one scale")
    total = None
    words = word_feats[:, :n_real]
    for ctx in context_per_scale:
        sims = cosine_similarity(ctx[:, :n_real], words, dim=0)  # n_real
        term = torch.logsumexp(sims, dim=0)
        total = term if total is None else total + term
    return total


def pairwise_match_matrix(
    region_pyramids: list[list[torch.Tensor]],
    word_feats_batch: torch.Tensor,
    lengths: list[int],
) -> torch.Tensor:
    """Match score matrix over a batch: entry (i, j) scores image i against text j.

    ``region_pyramids[i]`` holds per-scale L x R region features of image i,
    ``word_feats_batch`` is I x L x N.
    """
    batch = len(region_pyramids)
    feat_dim, n = word_feats_batch.shape[1], word_feats_batch.shape[2]
    # words of the whole batch side by side; the region softmax is per word
    # column, so attending to the concatenation equals per-pair attention
    all_words = word_feats_batch.permute(1, 0, 2).reshape(feat_dim, batch * n)
    rows = []
    for i in range(batch):
        ctx_all = [visual_to_text_attention(regions, all_words) for regions in region_pyramids[i]]
        row = []
        for j in range(batch):
            ctx = [c[:, j * n : (j + 1) * n] for c in ctx_all]
            row.append(visual_text_distance(ctx, word_feats_batch[j], lengths[j]))
        rows.append(torch.stack(row))
    return torch.stack(rows)


def multimodal_similarity_loss(
    region_pyramids: list[list[torch.Tensor]],
    word_feats_batch: torch.Tensor,
    lengths: list[int],
) -> torch.Tensor:
    """Batch contrastive loss over the match matrix.

    Row-softmax diagonals are the text-given-image posteriors, column-softmax
    diagonals the image-given-text posteriors; the loss is the summed negative
    log of both.
    """
    batch = len(region_pyramids)
    if batch < 2:
        raise ValueError("contrastive loss needs a batch of at least 2")
    scores = pairwise_match_matrix(region_pyramids, word_feats_batch, lengths)
    log_p_text = torch.log_softmax(scores, dim=1).diagonal()
    log_p_image = torch.log_softmax(scores.transpose(0, 1), dim=1).diagonal()
    return -(log_p_text.sum() + log_p_image.sum())


def contrastive_loss_from_matrix(scores: torch.Tensor) -> torch.Tensor:
    """Same loss given a precomputed match matrix (used by oracle tests)."""
    if scores.shape[0] < 2:
        raise ValueError("contrastive loss needs a batch of at least 2")
    log_p_text = torch.log_softmax(scores, dim=1).diagonal()
    log_p_image = torch.log_softmax(scores.transpose(0, 1), dim=1).diagonal()
    return -(log_p_text.sum() + log_p_image.sum())
