"""Versioned checkpoint files: binary tensor container plus a JSON sidecar."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

from .config import TrainConfig
from .core import TextPoseError

CHECKPOINT_VERSION = 1


class CheckpointError(TextPoseError):
    pass


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_checkpoint(
    path: str | Path,
    kind: str,
    modules: dict[str, torch.nn.Module],
    config: TrainConfig,
    seed: int,
    extra: dict | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "state": {name: mod.state_dict() for name, mod in modules.items()},
    }
    torch.save(payload, path)
    sidecar = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config.to_dict(),
        "seed": seed,
        "sha256": file_sha256(path),
        "extra": extra or {},
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_checkpoint(path: str | Path, expect_kind: str | None = None) -> tuple[dict, dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version: {payload.get('version')}")
    if expect_kind and payload.get("kind") != expect_kind:
        raise CheckpointError(f"expected {expect_kind} checkpoint, got {payload.get('kind')}")
    side = sidecar_path(path)
    if not side.exists():
        raise CheckpointError(f"checkpoint sidecar not found: {side}")
    sidecar = json.loads(side.read_text())
    return payload, sidecar
