"""Manifest loading, identity splits, pose pairs, and the synthetic fixture."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import Pose, TextPoseError, normalize_pose, resize_image
from .metrics import PALETTE, PALETTE_NAMES
from .pose_prior import BasicPoseSet, orientation_label

POSE_DISTANCE_TOL = 1e-6

# one phrase per basic orientation, appended to captions (K=8 defaults)
PHRASEBOOK = [
    "facing the camera",
    "facing the camera turned slightly right",
    "facing right",
    "facing away turned slightly right",
    "facing away from the camera",
    "facing away turned slightly left",
    "facing left",
    "facing the camera turned slightly left",
]


class ManifestError(TextPoseError):
    pass


@dataclass
class Sample:
    id: str
    identity: str
    image_path: Path
    pose: Pose
    caption: str
    attrs: dict = field(default_factory=dict)

    def load_image(self, height: int, width: int) -> np.ndarray:
        """Decode and resize lazily; returns a 3xHxW tensor in [-1, 1]."""
        return resize_image(self.image_path.read_bytes(), height, width)


@dataclass(frozen=True)
class PairIndex:
    pairs: list[tuple[str, str]]

    def __len__(self) -> int:
        return len(self.pairs)


def load_manifest(path: str | Path, num_joints: int, frame: tuple[int, int]) -> list[Sample]:
    """Parse a JSON-lines manifest, validating every record."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    samples = []
    seen_ids = set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: invalid JSON ({exc})") from exc
        for fname in ("id", "identity", "image", "caption", "pose"):
            if fname not in record:
                raise ManifestError(f"line {lineno}: missing field {fname!r}")
        if record["id"] in seen_ids:
            raise ManifestError(f"line {lineno}: duplicate field 'id' value {record['id']!r}")
        seen_ids.add(record["id"])
        pose_entries = record["pose"]
        if len(pose_entries) != num_joints:
            raise ManifestError(
                f"line {lineno}: field 'pose' has {len(pose_entries)} joints, expected {num_joints}"
            )
        try:
            pose = Pose.from_list(pose_entries, frame)
        except (ValueError, TypeError) as exc:
            raise ManifestError(f"line {lineno}: field 'pose' invalid: {exc}") from exc
        if not str(record["caption"]).strip():
            raise ManifestError(f"line {lineno}: field 'caption' is empty")
        samples.append(
            Sample(
                id=str(record["id"]),
                identity=str(record["identity"]),
                image_path=(base / record["image"]).resolve(),
                pose=pose,
                caption=str(record["caption"]),
                attrs=dict(record.get("attrs", {})),
            )
        )
    return samples


def split_identities(
    samples: list[Sample], test_fraction: float, seed: int
) -> tuple[list[Sample], list[Sample]]:
    """Seeded identity-disjoint split; no identity appears in both halves."""
    identities = sorted({s.identity for s in samples})
    rng = np.random.default_rng(seed)
    rng.shuffle(identities)
    n_test = int(round(test_fraction * len(identities)))
    test_ids = set(identities[:n_test])
    train = [s for s in samples if s.identity not in test_ids]
    test = [s for s in samples if s.identity in test_ids]
    return train, test


def make_pairs(samples: list[Sample]) -> PairIndex:
    """All ordered same-identity pairs whose poses actually differ."""
    by_identity: dict[str, list[Sample]] = {}
    for s in samples:
        by_identity.setdefault(s.identity, []).append(s)
    pairs = []
    for members in by_identity.values():
        vecs = {s.id: normalize_pose(s.pose) for s in members}
        for a in members:
            for b in members:
                if a.id == b.id:
                    continue
                if float(np.linalg.norm(vecs[a.id] - vecs[b.id])) > POSE_DISTANCE_TOL:
                    pairs.append((a.id, b.id))
    return PairIndex(pairs=pairs)


def append_orientation_phrase(
    sample: Sample, basics: BasicPoseSet, phrasebook: list[str] | None = None
) -> Sample:
    """Append the phrase of the pose's nearest basic orientation (idempotent)."""
    phrasebook = PHRASEBOOK if phrasebook is None else phrasebook
    caption = sample.caption.rstrip()
    if any(caption.endswith(p) for p in phrasebook):
        return sample
    label = orientation_label(sample.pose, basics)
    phrase = phrasebook[label % len(phrasebook)]
    return Sample(
        id=sample.id,
        identity=sample.identity,
        image_path=sample.image_path,
        pose=sample.pose,
        caption=f"{caption}, {phrase}",
        attrs=sample.attrs,
    )


# ---------------------------------------------------------------------------
# synthetic fixture: procedurally drawn stick-figure pedestrians

_SKIN = (0.96, 0.80, 0.69)
_BACKGROUND = 0.82

_CAPTION_TEMPLATES = [
    "a {person} wearing a {shirt} shirt and {pants} pants, {phrase}",
    "the {person} is in a {shirt} shirt and {pants} pants, {phrase}",
    "a {person} in a {shirt} shirt with {pants} pants, {phrase}",
]


def _archetype_pose(orientation: int, height: int, width: int) -> np.ndarray:
    """Joint layout for one of 8 facing directions, at 128x64 reference scale."""
    theta = 2.0 * math.pi * orientation / 8.0
    side = math.cos(theta)   # +1 facing camera, -1 facing away (mirrors laterally)
    turn = math.sin(theta)   # head/limbs swing toward the profile direction
    cx = 32.0

    def pt(dx, y, swing=0.0):
        return (cx + side * dx + swing * turn, y)

    joints = [
        (cx + 10.0 * turn, 10.0),            # nose
        pt(0, 24),                           # neck
        pt(-10, 26), pt(-11, 44, 6), pt(-12, 60, 8),   # right arm
        pt(+10, 26), pt(+11, 44, 6), pt(+12, 60, 8),   # left arm
        pt(-6, 66), pt(-7, 88), pt(-7, 112, 5),        # right leg
        pt(+6, 66), pt(+7, 88), pt(+7, 112, 5),        # left leg
        (cx + 10.0 * turn - side * 3.0, 8.0),          # right eye
        (cx + 10.0 * turn + side * 3.0, 8.0),          # left eye
        (cx + 10.0 * turn - side * 5.0, 9.0),          # right ear
        (cx + 10.0 * turn + side * 5.0, 9.0),          # left ear
    ]
    arr = np.array([[x * width / 64.0, y * height / 128.0, 1.0] for x, y in joints])
    return arr


def _paint_rect(canvas: np.ndarray, top: float, bottom: float, left: float, right: float, color):
    h, w = canvas.shape[:2]
    t = max(0, int(round(top)))
    b = min(h, int(round(bottom)))
    l = max(0, int(round(left)))
    r = min(w, int(round(right)))
    if t < b and l < r:
        canvas[t:b, l:r] = color


def _paint_disk(canvas: np.ndarray, cy: float, cx: float, radius: float, color):
    h, w = canvas.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    canvas[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2] = color


def _draw_person(joints: np.ndarray, shirt: str, pants: str, height: int, width: int) -> np.ndarray:
    """Paint rectangles large enough that every probe region is solid color."""
    rgb = dict(zip(PALETTE_NAMES, [c for _, c in PALETTE]))
    canvas = np.full((height, width, 3), _BACKGROUND, dtype=np.float64)
    sy = height / 128.0
    sx = width / 64.0
    pad = 12.0 * sx

    nose = joints[0]
    _paint_disk(canvas, nose[1] - 2 * sy, nose[0], 4.5 * sx, _SKIN)

    neck, r_sh, l_sh = joints[1], joints[2], joints[5]
    r_hip, l_hip = joints[8], joints[11]
    _paint_rect(
        canvas,
        top=neck[1] - pad,
        bottom=max(r_hip[1], l_hip[1]) + 2 * sy,
        left=min(r_sh[0], l_sh[0], neck[0]) - pad,
        right=max(r_sh[0], l_sh[0], neck[0]) + pad,
        color=rgb[shirt],
    )

    for knee, ankle in ((joints[9], joints[10]), (joints[12], joints[13])):
        _paint_rect(
            canvas,
            top=max(r_hip[1], l_hip[1]) + 2 * sy,
            bottom=ankle[1] + 6 * sy,
            left=min(knee[0], ankle[0]) - pad,
            right=max(knee[0], ankle[0]) + pad,
            color=rgb[pants],
        )
    return canvas


def generate_synthetic_fixture(
    n_identities: int,
    per_identity: int,
    seed: int,
    out_dir: str | Path,
    height: int = 128,
    width: int = 64,
) -> Path:
    """Write a deterministic stick-figure dataset and its JSON-lines manifest.

    Each identity keeps one orientation and one outfit; poses vary per image.
    Captions follow a color-part grammar and end with the orientation phrase,
    and the painted colors are recorded under ``attrs`` for metric fixtures.
    At the default 128x64 size the painted regions fully cover the probe
    masks, so the default color oracle recovers the painted colors exactly.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = []
    for ident in range(n_identities):
        orientation = ident % 8
        shirt = PALETTE_NAMES[int(rng.integers(len(PALETTE_NAMES)))]
        pants = PALETTE_NAMES[int(rng.integers(len(PALETTE_NAMES)))]
        person = "man" if rng.integers(2) == 0 else "woman"
        base = _archetype_pose(orientation, height, width)
        for j in range(per_identity):
            joints = base.copy()
            joints[:, 0] += rng.normal(0.0, 0.6, size=len(joints)) * width / 64.0
            joints[:, 1] += rng.normal(0.0, 0.6, size=len(joints)) * height / 128.0
            # one free limb per image so same-identity poses always differ
            joints[7, 1] += rng.uniform(-6.0, 6.0) * height / 128.0
            joints[:, 0] = joints[:, 0].clip(0, width - 1)
            joints[:, 1] = joints[:, 1].clip(0, height - 1)
            pose = Pose(joints=joints, frame=(height, width))

            canvas = _draw_person(joints, shirt, pants, height, width)
            sample_id = f"id{ident:03d}_{j}"
            image_rel = f"images/{sample_id}.png"
            Image.fromarray((canvas * 255.0).round().astype(np.uint8)).save(out_dir / image_rel)

            template = _CAPTION_TEMPLATES[int(rng.integers(len(_CAPTION_TEMPLATES)))]
            caption = template.format(
                person=person, shirt=shirt, pants=pants, phrase=PHRASEBOOK[orientation]
            )
            lines.append(
                json.dumps(
                    {
                        "id": sample_id,
                        "identity": f"id{ident:03d}",
                        "image": image_rel,
                        "caption": caption,
                        "pose": pose.to_list(),
                        "attrs": {"shirt": shirt, "pants": pants, "orientation": orientation},
                    },
                    sort_keys=True,
                )
            )
    manifest = out_dir / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
