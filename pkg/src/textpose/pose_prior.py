"""Basic-pose clustering, heatmap/mask rendering, and orientation labels."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    ClusteringError,
    Pose,
    SKELETON_EDGES,
    denormalize_vector,
    normalize_pose,
)

log = logging.getLogger(__name__)

KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6


@dataclass(frozen=True)
class BasicPoseSet:
    """K cluster-mean poses plus the cluster assignment of every input."""

    poses: list[Pose]
    assignments: dict[str, int]

    @property
    def k(self) -> int:
        return len(self.poses)

    def to_json(self) -> str:
        h, w = self.poses[0].frame
        doc = {
            "version": 1,
            "K": self.k,
            "J": self.poses[0].num_joints,
            "frame": [h, w],
            "poses": [p.to_list() for p in self.poses],
            "assignments": self.assignments,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BasicPoseSet":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported basic-pose file version: {doc.get('version')}")
        frame = (int(doc["frame"][0]), int(doc["frame"][1]))
        poses = [Pose.from_list(p, frame) for p in doc["poses"]]
        return cls(poses=poses, assignments={k: int(v) for k, v in doc.get("assignments", {}).items()})


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: sample centers proportional to squared distance."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            centers[i] = x[rng.integers(n)]
            continue
        target = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), target))
        idx = min(idx, n - 1)
        centers[i] = x[idx]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans(
    x: np.ndarray, k: int, seed: int, max_iter: int = KMEANS_MAX_ITER, tol: float = KMEANS_TOL
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Seeded Lloyd iteration. Returns (means, labels, per-iteration objective).

    The objective history records the sum of squared distances after each
    assignment step; it is non-increasing by construction.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < k:
        raise ClusteringError(f"need at least K={k} poses, got {n}")
    if np.unique(x, axis=0).shape[0] < k:
        raise ClusteringError(f"need at least K={k} distinct pose vectors")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(x, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    objective: list[float] = []
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        objective.append(float(d2[np.arange(n), labels].sum()))
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = x[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the worst-fit point; this can
                # only lower the objective since that point's cost drops to 0
                worst = int(d2[np.arange(n), labels].argmax())
                new_centers[j] = x[worst]
                labels[worst] = j
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift <= tol:
            break
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    objective.append(float(d2[np.arange(n), labels].sum()))
    return centers, labels, objective


def cluster_basic_poses(
    poses: list[Pose], k: int, seed: int, ids: list[str] | None = None
) -> BasicPoseSet:
    """K-means over normalized pose vectors; means are de-normalized poses."""
    if k < 1:
        raise ClusteringError("K must be >= 1")
    if ids is None:
        ids = [str(i) for i in range(len(poses))]
    if len(ids) != len(poses):
        raise ValueError("ids and poses length mismatch")
    vectors = np.stack([normalize_pose(p) for p in poses])
    centers, labels, _ = kmeans(vectors, k, seed)
    frame = poses[0].frame
    mean_poses = [denormalize_vector(c, frame) for c in centers]
    assignments = {sid: int(lab) for sid, lab in zip(ids, labels)}
    return BasicPoseSet(poses=mean_poses, assignments=assignments)


def render_heatmap(pose: Pose, radius: float) -> np.ndarray:
    """Per-joint binary disk heatmap: 1 within ``radius`` of the joint, else 0."""
    h, w = pose.frame
    out = np.zeros((pose.num_joints, h, w), dtype=np.float32)
    yy, xx = np.mgrid[0:h, 0:w]
    for j, (x, y, v) in enumerate(pose.joints):
        if v <= 0.5:
            continue
        d2 = (xx - x) ** 2 + (yy - y) ** 2
        out[j] = (d2 <= radius * radius).astype(np.float32)
    return out


def _segment_distance(px: np.ndarray, py: np.ndarray, a, b) -> np.ndarray:
    """Distance from each pixel to segment a-b."""
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0:
        return np.sqrt((px - ax) ** 2 + (py - ay) ** 2)
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
    cx = ax + t * dx
    cy = ay + t * dy
    return np.sqrt((px - cx) ** 2 + (py - cy) ** 2)


def pose_mask(pose: Pose, dilation: float, joints: list[int] | None = None) -> np.ndarray:
    """Binary 1xHxW silhouette: dilated joints plus dilated skeleton segments.

    ``joints`` restricts the mask to a subset of joint indices (used to probe
    body-part regions). A pose with no visible joint yields an all-ones mask
    so downstream losses degrade to unmasked instead of vanishing.
    """
    h, w = pose.frame
    idx = list(range(pose.num_joints)) if joints is None else list(joints)
    sel = set(idx)
    vis = pose.visible
    if not any(vis[j] for j in idx):
        log.warning("pose mask fallback: no visible joints, returning all-ones")
        return np.ones((1, h, w), dtype=np.float32)
    yy, xx = np.mgrid[0:h, 0:w]
    xx = xx.astype(np.float64)
    yy = yy.astype(np.float64)
    mask = np.zeros((h, w), dtype=bool)
    for j in idx:
        if not vis[j]:
            continue
        x, y = pose.joints[j, 0], pose.joints[j, 1]
        mask |= (xx - x) ** 2 + (yy - y) ** 2 <= dilation * dilation
    for a, b in SKELETON_EDGES:
        if a in sel and b in sel and vis[a] and vis[b]:
            d = _segment_distance(xx, yy, pose.joints[a, :2], pose.joints[b, :2])
            mask |= d <= dilation
    return mask[None].astype(np.float32)


def orientation_label(pose: Pose, basics: BasicPoseSet) -> int:
    """Index of the nearest basic pose in normalized space (ties: lowest)."""
    vec = normalize_pose(pose)
    dists = [float(((vec - normalize_pose(b)) ** 2).sum()) for b in basics.poses]
    return int(np.argmin(dists))


def heatmap_to_keypoints(heatmap: np.ndarray) -> Pose:
    """Inverse codec: activation-weighted centroid of pixels >= 0.5 per channel."""
    heatmap = np.asarray(heatmap)
    j, h, w = heatmap.shape
    joints = np.zeros((j, 3), dtype=np.float64)
    yy, xx = np.mgrid[0:h, 0:w]
    for c in range(j):
        act = heatmap[c]
        on = act >= 0.5
        if not on.any():
            continue
        weights = act[on].astype(np.float64)
        total = weights.sum()
        x = float((xx[on] * weights).sum() / total)
        y = float((yy[on] * weights).sum() / total)
        joints[c] = (min(max(x, 0.0), w - 1e-6), min(max(y, 0.0), h - 1e-6), 1.0)
    return Pose(joints=joints, frame=(h, w))
