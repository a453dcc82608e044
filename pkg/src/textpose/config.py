"""Run configuration: every hyperparameter with its default, plus file/flag parsing."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .core import TextPoseError


class ConfigError(TextPoseError):
    pass


@dataclass
class TrainConfig:
    """All knobs of the pipeline. Flags override config-file values which
    override these defaults."""

    num_basic_poses: int = 8       # pose clusters / orientations
    num_scales: int = 3            # encoder downsamples / attentional upsamples
    num_joints: int = 18
    height: int = 128
    width: int = 64
    text_feat_dim: int = 256       # per-word feature size (two directions)
    sent_feat_dim: int = 256       # sentence vector size
    embed_dim: int = 128           # word embedding size
    max_words: int = 32
    heatmap_radius: float = 4.0
    mask_dilation: float = 8.0
    mse_weight: float = 10.0       # pose reconstruction weight (stage 1)
    orient_weight: float = 1.0     # orientation cross-entropy weight (stage 1)
    recon_weight: float = 10.0     # masked L1 weight (stage 2)
    match_weight: float = 1.0      # multimodal similarity weight (stage 2)
    base_channels: int = 32        # first conv width of every net
    cond_channels: int = 16        # conditioning feature width in discriminators
    batch_size: int = 4
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    lr_d_stage1: float = 5e-5  # slower pose discriminator; see trainer notes
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    steps_stage1: int = 500
    steps_stage2: int = 2000
    vocab_min_freq: int = 1
    seed: int = 7
    split_text_encoders: bool = False  # stage 2 restarts its text encoder from scratch

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.num_basic_poses < 1:
            raise ConfigError("num_basic_poses must be >= 1")
        scale = 2 ** self.num_scales
        if self.height % scale or self.width % scale:
            raise ConfigError(
                f"height/width must be divisible by 2^num_scales={scale}, "
                f"got {self.height}x{self.width}"
            )
        if self.text_feat_dim % 2:
            raise ConfigError("text_feat_dim must be even")
        for name in ("mse_weight", "orient_weight", "recon_weight", "match_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.max_words < 3:
            raise ConfigError("max_words must fit bos + word + eos")

    def scale_channels(self) -> list[int]:
        """Feature width per scale, deepest scale first."""
        return [self.base_channels * 2 ** (self.num_scales - i) for i in range(1, self.num_scales + 1)]

    def replace(self, **kwargs) -> "TrainConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(kwargs)
        return TrainConfig(**values)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def _coerce(name: str, raw: str, target_type):
    raw = raw.strip().strip('"').strip("'")
    try:
        if target_type is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {name!r}: cannot parse {raw!r} as {target_type.__name__}") from exc


def load_config_file(path: str | Path) -> dict:
    """Parse a ``key = value`` config file (a flat TOML subset)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    types = {f.name: f.type for f in fields(TrainConfig)}
    concrete = {f.name: type(getattr(TrainConfig(), f.name)) for f in fields(TrainConfig)}
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw, concrete[key])
    return values
