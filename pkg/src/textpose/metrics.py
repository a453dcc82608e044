"""Attribute-transfer and image-quality metrics with pluggable oracles."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import Pose, TextPoseError, image_to_unit
from .pose_prior import pose_mask

# 10-color palette: (name, RGB in [0, 1]); order breaks nearest-color ties.
PALETTE: list[tuple[str, tuple[float, float, float]]] = [
    ("black", (0.0, 0.0, 0.0)),
    ("white", (1.0, 1.0, 1.0)),
    ("red", (1.0, 0.0, 0.0)),
    ("green", (0.0, 0.8, 0.0)),
    ("blue", (0.0, 0.0, 1.0)),
    ("yellow", (1.0, 1.0, 0.0)),
    ("orange", (1.0, 0.55, 0.0)),
    ("purple", (0.55, 0.0, 0.8)),
    ("pink", (1.0, 0.6, 0.75)),
    ("brown", (0.55, 0.3, 0.1)),
]
PALETTE_NAMES = [name for name, _ in PALETTE]

# body-part noun -> probe joints (18-joint layout); regions built from these
PART_JOINTS: dict[str, list[int]] = {
    "shirt": [1, 2, 5],
    "jacket": [1, 2, 5],
    "pants": [9, 12],
    "shorts": [9, 12],
    "skirt": [8, 11],
    "shoes": [10, 13],
    "bag": [4, 7],
}

_WORD_RE = re.compile(r"[a-z0-9]+")


class MetricError(TextPoseError):
    pass


@dataclass(frozen=True)
class ColorProbe:
    """One attribute probe: the caption with a color substituted, the probed
    body part, the expected answer, and the rendered question."""

    caption: str
    part: str
    answer: str
    question: str
    span: tuple[int, int]  # character span of the color word in the source caption

    def __post_init__(self):
        if self.answer not in PALETTE_NAMES:
            raise MetricError(f"probe answer {self.answer!r} not in palette")


def _token_spans(caption: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(caption.lower())]


def make_color_probes(caption: str, seed: int, parts: dict[str, list[int]] | None = None) -> list[ColorProbe]:
    """Detect (color, part) bigrams and substitute a seeded random palette color.

    Returns one probe per detected pattern; substitutions are independent.
    An unmatched caption yields an empty list and the caller skips the sample.
    """
    parts = PART_JOINTS if parts is None else parts
    rng = np.random.default_rng(seed)
    spans = _token_spans(caption)
    probes = []
    for (tok, start, end), (nxt, _, _) in zip(spans, spans[1:]):
        if tok in PALETTE_NAMES and nxt in parts:
            new_color = PALETTE_NAMES[int(rng.integers(len(PALETTE_NAMES)))]
            edited = caption[:start] + new_color + caption[end:]
            probes.append(
                ColorProbe(
                    caption=edited,
                    part=nxt,
                    answer=new_color,
                    question=f"what color is the {nxt}?",
                    span=(start, end),
                )
            )
    return probes


def edited_caption(caption: str, probes: list[ColorProbe]) -> str:
    """Apply every probe's substitution to one caption (spans do not overlap)."""
    out = caption
    for probe in sorted(probes, key=lambda p: p.span[0], reverse=True):
        start, end = probe.span
        out = out[:start] + probe.answer + out[end:]
    return out


def question_part(question: str) -> str | None:
    for tok in _WORD_RE.findall(question.lower()):
        if tok in PART_JOINTS:
            return tok
    return None


def nearest_palette_color(rgb: np.ndarray) -> str:
    dists = [float(((rgb - np.asarray(c)) ** 2).sum()) for _, c in PALETTE]
    return PALETTE_NAMES[int(np.argmin(dists))]


def default_color_oracle(image: np.ndarray, question: str, pose: Pose, dilation: float = 8.0) -> str:
    """Desk-scale answer oracle: mean color of the probed part's pose region,
    snapped to the nearest palette color."""
    part = question_part(question)
    if part is None:
        return "unknown"
    joints = PART_JOINTS[part]
    if not any(pose.visible[j] for j in joints):
        return "unknown"
    region = pose_mask(pose, dilation, joints=joints)[0] > 0.5
    unit = image_to_unit(image)
    mean_rgb = unit[region].mean(axis=0)
    return nearest_palette_color(mean_rgb)


class RegisteredPoseOracle:
    """VqaOracle adapter binding a pose to each image (keyed by content hash)."""

    def __init__(self, dilation: float = 8.0):
        self.dilation = dilation
        self._poses: dict[str, Pose] = {}

    @staticmethod
    def _key(image: np.ndarray) -> str:
        return hashlib.sha1(np.ascontiguousarray(image, dtype=np.float32).tobytes()).hexdigest()

    def register(self, image: np.ndarray, pose: Pose):
        self._poses[self._key(image)] = pose

    def answer(self, image: np.ndarray, question: str) -> str:
        pose = self._poses.get(self._key(image))
        if pose is None:
            return "unknown"
        return default_color_oracle(image, question, pose, self.dilation)


def vqa_perceptual_score(entries: list[tuple[np.ndarray, list[ColorProbe]]], oracle) -> float:
    """Fraction of images whose every probe is answered correctly."""
    if not entries:
        raise MetricError("need at least one image to score")
    answer = oracle.answer if hasattr(oracle, "answer") else oracle
    t = 0
    for image, probes in entries:
        if all(answer(image, p.question) == p.answer for p in probes):
            t += 1
    return t / len(entries)


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def ssim(a: np.ndarray, b: np.ndarray, value_range: float = 2.0) -> float:
    """Mean structural similarity over 11x11 Gaussian windows (sigma 1.5).

    Stabilizers are (0.01 * range)^2 and (0.03 * range)^2; inputs are 3xHxW
    tensors sharing one value range.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 3:
        raise MetricError(f"expected CxHxW, got shape {a.shape}")
    size, sigma = 11, 1.5
    if a.shape[1] < size or a.shape[2] < size:
        raise MetricError(f"image smaller than the {size}x{size} window")
    kernel = _gaussian_kernel(size, sigma)
    half = size // 2

    def smooth(x: np.ndarray) -> np.ndarray:
        out = correlate1d(x, kernel, axis=1, mode="constant")
        out = correlate1d(out, kernel, axis=2, mode="constant")
        return out[:, half:-half, half:-half]  # keep fully supported windows only

    c1 = (0.01 * value_range) ** 2
    c2 = (0.03 * value_range) ** 2
    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a * mu_a
    var_b = smooth(b * b) - mu_b * mu_b
    cov = smooth(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def inception_score(
    images: list[np.ndarray] | np.ndarray, classifier, splits: int = 10
) -> tuple[float, float]:
    """exp(mean KL(p(y|x) || p(y))) per split; returns (mean, std) over splits.

    ``classifier`` maps the image list to an (n, C) row-stochastic matrix.
    """
    probs = np.asarray(classifier(images), dtype=np.float64)
    if probs.ndim != 2:
        raise MetricError(f"classifier must return (n, C) probabilities, got shape {probs.shape}")
    if (probs < -1e-9).any() or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
        raise MetricError("classifier output rows must be probability distributions")
    n = probs.shape[0]
    splits = max(1, min(splits, n))
    scores = []
    for chunk in np.array_split(probs, splits):
        marginal = chunk.mean(axis=0)
        ratio = np.where(chunk > 0, chunk / marginal, 1.0)
        kl = (chunk * np.log(ratio)).sum(axis=1)
        scores.append(float(np.exp(kl.mean())))
    return float(np.mean(scores)), float(np.std(scores))


class PaletteShirtClassifier:
    """Default pluggable classifier: distribution over palette colors from the
    mean shirt-region color. Poses must be registered per image."""

    def __init__(self, temperature: float = 0.02, dilation: float = 8.0):
        self.temperature = temperature
        self.oracle = RegisteredPoseOracle(dilation)

    def register(self, image: np.ndarray, pose: Pose):
        self.oracle.register(image, pose)

    def __call__(self, images) -> np.ndarray:
        rows = []
        colors = np.asarray([c for _, c in PALETTE])
        for image in images:
            pose = self.oracle._poses.get(self.oracle._key(image))
            if pose is None or not any(pose.visible[j] for j in PART_JOINTS["shirt"]):
                rows.append(np.full(len(PALETTE), 1.0 / len(PALETTE)))
                continue
            region = pose_mask(pose, self.oracle.dilation, joints=PART_JOINTS["shirt"])[0] > 0.5
            mean_rgb = image_to_unit(image)[region].mean(axis=0)
            d2 = ((colors - mean_rgb) ** 2).sum(axis=1)
            logits = -d2 / self.temperature
            e = np.exp(logits - logits.max())
            rows.append(e / e.sum())
        return np.stack(rows)
