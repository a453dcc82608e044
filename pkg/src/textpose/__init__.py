"""Text guided person image synthesis: two-stage pose and attribute transfer."""

from .config import TrainConfig
from .core import Pose, resize_image
from .pose_prior import BasicPoseSet, cluster_basic_poses, heatmap_to_keypoints, pose_mask, render_heatmap
from .text import Vocab, build_vocab, tokenize

__version__ = "0.1.0"

__all__ = [
    "BasicPoseSet",
    "Pose",
    "TrainConfig",
    "Vocab",
    "build_vocab",
    "cluster_basic_poses",
    "heatmap_to_keypoints",
    "pose_mask",
    "render_heatmap",
    "resize_image",
    "tokenize",
    "__version__",
]
