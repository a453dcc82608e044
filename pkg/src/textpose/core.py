"""Shared domain types and deterministic image/keypoint geometry."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

# 18-joint layout (OpenPose/COCO convention with an explicit neck joint).
JOINT_NAMES = [
    "nose", "neck",
    "right_shoulder", "right_elbow", "right_wrist",
    "left_shoulder", "left_elbow", "left_wrist",
    "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "right_eye", "left_eye", "right_ear", "left_ear",
]
NUM_JOINTS = len(JOINT_NAMES)

# Skeleton edges over the 18-joint layout, used for pose masks and overlays.
SKELETON_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 7),
    (1, 8), (8, 9), (9, 10), (1, 11), (11, 12), (12, 13),
    (0, 14), (14, 16), (0, 15), (15, 17),
]


class TextPoseError(Exception):
    """Base class for errors raised by this package."""


class ImageFormatError(TextPoseError):
    """Raised when raw image bytes cannot be decoded."""


class DegeneratePoseError(TextPoseError):
    """Raised when an operation needs at least one visible joint."""


class ClusteringError(TextPoseError):
    """Raised when the pose set cannot support the requested clustering."""


@dataclass(frozen=True)
class Pose:
    """An ordered list of 2D joints with visibility flags, in pixel space.

    ``joints`` is a (J, 3) array of (x, y, visible); ``frame`` is (H, W).
    Instances are immutable after construction.
    """

    joints: np.ndarray
    frame: tuple[int, int]

    def __post_init__(self):
        arr = np.asarray(self.joints, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"joints must be (J, 3), got {arr.shape}")
        h, w = self.frame
        vis = arr[:, 2] > 0.5
        if vis.any():
            xs, ys = arr[vis, 0], arr[vis, 1]
            if (xs < 0).any() or (xs >= w).any() or (ys < 0).any() or (ys >= h).any():
                raise ValueError("visible joint outside frame")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "joints", arr)
        object.__setattr__(self, "frame", (int(h), int(w)))

    @property
    def num_joints(self) -> int:
        return self.joints.shape[0]

    @property
    def visible(self) -> np.ndarray:
        return self.joints[:, 2] > 0.5

    def num_visible(self) -> int:
        return int(self.visible.sum())

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y), int(v > 0.5)] for x, y, v in self.joints]

    @classmethod
    def from_list(cls, entries, frame: tuple[int, int]) -> "Pose":
        return cls(joints=np.asarray(entries, dtype=np.float64), frame=frame)


def decode_image(data) -> np.ndarray:
    """Decode raw bytes / PIL image / array into an RGB float array in [0, 1]."""
    if isinstance(data, (bytes, bytearray)):
        try:
            img = Image.open(io.BytesIO(data))
            img.load()
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise ImageFormatError(f"cannot decode image bytes: {exc}") from exc
        data = img
    if isinstance(data, Image.Image):
        arr = np.asarray(data.convert("RGB"), dtype=np.float64) / 255.0
        return arr
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageFormatError(f"expected HxWx3 array, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an HxWxC array using half-pixel sample centers."""
    in_h, in_w = arr.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return arr.copy()
    # source coordinate of each output pixel center, clamped to the grid
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    a = arr[y0][:, x0]
    b = arr[y0][:, x1]
    c = arr[y1][:, x0]
    d = arr[y1][:, x1]
    top = a * (1 - wx) + b * wx
    bot = c * (1 - wx) + d * wx
    return top * (1 - wy) + bot * wy


def resize_image(img, height: int, width: int) -> np.ndarray:
    """Decode and bilinearly resize to a 3xHxW tensor with values in [-1, 1]."""
    arr = decode_image(img)
    arr = bilinear_resize(arr, height, width)
    out = arr * 2.0 - 1.0
    return np.ascontiguousarray(out.transpose(2, 0, 1))


def image_to_unit(img: np.ndarray) -> np.ndarray:
    """Map a 3xHxW [-1, 1] tensor back to HxWx3 in [0, 1]."""
    return np.clip((np.asarray(img).transpose(1, 2, 0) + 1.0) / 2.0, 0.0, 1.0)


def image_to_png_bytes(img: np.ndarray) -> bytes:
    """Encode a 3xHxW [-1, 1] tensor as PNG bytes (deterministic)."""
    unit = image_to_unit(img)
    u8 = np.round(unit * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8).save(buf, format="PNG")
    return buf.getvalue()


def normalize_pose(pose: Pose) -> np.ndarray:
    """Frame-normalized interleaved coordinate vector (x1, y1, x2, y2, ...).

    Coordinates are divided by frame size; invisible joints take the centroid
    of the visible ones so the vector is fully populated for clustering.
    """
    vis = pose.visible
    if not vis.any():
        raise DegeneratePoseError("pose has no visible joints")
    h, w = pose.frame
    xs = pose.joints[:, 0] / w
    ys = pose.joints[:, 1] / h
    cx = xs[vis].mean()
    cy = ys[vis].mean()
    xs = np.where(vis, xs, cx)
    ys = np.where(vis, ys, cy)
    out = np.empty(2 * pose.num_joints, dtype=np.float64)
    out[0::2] = xs
    out[1::2] = ys
    return out


def denormalize_vector(vec: np.ndarray, frame: tuple[int, int]) -> Pose:
    """Inverse of :func:`normalize_pose` producing an all-visible pose."""
    h, w = frame
    vec = np.asarray(vec, dtype=np.float64)
    joints = np.empty((vec.size // 2, 3), dtype=np.float64)
    joints[:, 0] = np.clip(vec[0::2] * w, 0, w - 1e-6)
    joints[:, 1] = np.clip(vec[1::2] * h, 0, h - 1e-6)
    joints[:, 2] = 1.0
    return Pose(joints=joints, frame=frame)
