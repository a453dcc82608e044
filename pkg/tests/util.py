"""Shared test helpers: scalar attention oracles and gradient checking."""

import math

import numpy as np
import torch


def scalar_t2v(proj_words: np.ndarray, visual: np.ndarray, n_real: int) -> np.ndarray:
    """Brute-force word-attention mixing, element by element."""
    c, h, w = visual.shape
    flat = visual.reshape(c, h * w)
    z = np.zeros((c, h * w))
    for r in range(h * w):
        scores = [sum(proj_words[k, j] * flat[k, r] for k in range(c)) for j in range(n_real)]
        exps = [math.exp(s) for s in scores]
        total = sum(exps)
        for k in range(c):
            z[k, r] = sum(exps[j] / total * proj_words[k, j] for j in range(n_real))
    return z.reshape(c, h, w)


def scalar_v2t(regions: np.ndarray, words: np.ndarray) -> np.ndarray:
    """Brute-force region-attention mixing, element by element."""
    feat, num_regions = regions.shape
    n = words.shape[1]
    out = np.zeros((feat, n))
    for j in range(n):
        scores = [sum(regions[k, r] * words[k, j] for k in range(feat)) for r in range(num_regions)]
        exps = [math.exp(s) for s in scores]
        total = sum(exps)
        for k in range(feat):
            out[k, j] = sum(exps[r] / total * regions[k, r] for r in range(num_regions))
    return out


def scalar_cosine(a, b) -> float:
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def scalar_distance(contexts, words, n_real) -> float:
    total = 0.0
    for ctx in contexts:
        inner = sum(math.exp(scalar_cosine(ctx[:, j], words[:, j])) for j in range(n_real))
        total += math.log(inner)
    return total


def np_match_loss(region_pyramids, words_batch, lengths) -> float:
    """Independent numpy recomputation of the batch matching loss."""
    batch = len(region_pyramids)
    scores = np.zeros((batch, batch))
    for i in range(batch):
        for j in range(batch):
            total = 0.0
            for regions in region_pyramids[i]:
                att = regions.T @ words_batch[j]  # R x N
                att = np.exp(att - att.max(axis=0, keepdims=True))
                att /= att.sum(axis=0, keepdims=True)
                ctx = regions @ att  # L x N
                sims = []
                for col in range(lengths[j]):
                    na = np.linalg.norm(ctx[:, col])
                    nb = np.linalg.norm(words_batch[j][:, col])
                    sims.append(0.0 if na == 0 or nb == 0 else float(ctx[:, col] @ words_batch[j][:, col]) / (na * nb))
                total += math.log(sum(math.exp(s) for s in sims))
            scores[i, j] = total
    loss = 0.0
    for i in range(batch):
        row = np.exp(scores[i] - scores[i].max())
        col = np.exp(scores[:, i] - scores[:, i].max())
        loss -= math.log(row[i] / row.sum()) + math.log(col[i] / col.sum())
    return loss


def clamp01(p: float) -> float:
    return max(min(p, 1.0 - 1e-7), 1e-7)


def finite_diff_check(loss_fn, params, h=1e-5, rtol=1e-4, atol=1e-8):
    """Compare autograd gradients of a scalar loss against central differences.

    Perturbs every element of every parameter in place. Models must be in
    double precision for the stated tolerances to be meaningful.
    """
    params = [p for p in params if p.requires_grad]
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    checked = 0
    with torch.no_grad():
        for p, g in zip(params, grads):
            if g is None:
                g = torch.zeros_like(p)
            flat = p.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = float(loss_fn())
                flat[i] = orig - h
                down = float(loss_fn())
                flat[i] = orig
                fd = (up - down) / (2.0 * h)
                auto = float(gflat[i])
                err = abs(fd - auto)
                tol = atol + rtol * max(abs(fd), abs(auto))
                assert err <= tol, (
                    f"gradient mismatch at param shape {tuple(p.shape)} index {i}: "
                    f"autograd {auto:.8g} vs finite-diff {fd:.8g} (err {err:.3g} > tol {tol:.3g})"
                )
                checked += 1
    return checked
