"""Checkpoint container.

A checkpoint is an ``.npz`` archive: one float32 array per canonical parameter
name (``en_s.app.stage1.conv.w``, ``disc.conv2.b`` ...), optional optimiser
buffers under ``opt.<optimiser>.<name>``, and a ``__meta__`` entry holding a
JSON document with the model fingerprint, configs and resumable run state.
Writes are atomic (temp file, then rename).
"""
from __future__ import annotations

import json
import os
import tempfile
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import CorruptCheckpoint, FingerprintMismatch, MissingCheckpoint
from ..model import ModelConfig, SegmentationNet, canonical_parameters, init_target_encoder
from .config import TrainConfig

FORMAT = "flowseg-ckpt/1"


@dataclass
class Checkpoint:
    model: SegmentationNet
    config: TrainConfig | None
    extra: dict = field(default_factory=dict)
    optimizer_arrays: dict = field(default_factory=dict)


def save_checkpoint(model: SegmentationNet, config: TrainConfig | None, path, optimizers=None,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    arrays = {name: p.detach().cpu().numpy().astype(np.float32)
              for name, p in canonical_parameters(model).items()}
    for key, opt in (optimizers or {}).items():
        arrays.update({k: v.astype(np.float32) for k, v in opt.state_arrays(f"opt.{key}").items()})
    meta = {
        "format": FORMAT,
        "fingerprint": model.config.fingerprint(),
        "model": model.config.to_dict(),
        "train": config.to_flat() if config is not None else None,
        "has_en_t": model.en_t is not None,
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "extra": extra or {},
    }
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_meta(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingCheckpoint(f"no checkpoint at {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            return json.loads(bytes(data["__meta__"]).decode())
    except (zipfile.BadZipFile, KeyError, ValueError, OSError) as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from exc


def load_checkpoint(path, expected: ModelConfig | TrainConfig | None = None) -> Checkpoint:
    """Rebuild the model stored at ``path``.

    ``expected`` (a model or train config) must have the same architecture
    fingerprint, otherwise :class:`FingerprintMismatch` is raised.
    """
    path = Path(path)
    meta = read_meta(path)
    if meta.get("format") != FORMAT:
        raise CorruptCheckpoint(f"{path}: unknown format {meta.get('format')!r}")
    model_cfg = ModelConfig(**{**meta["model"], "widths": tuple(meta["model"]["widths"]),
                               "disc_widths": tuple(meta["model"]["disc_widths"])})
    if model_cfg.fingerprint() != meta["fingerprint"]:
        raise CorruptCheckpoint(f"{path}: stored fingerprint does not match stored model config")
    if expected is not None:
        exp = expected.model if isinstance(expected, TrainConfig) else expected
        if exp.fingerprint() != meta["fingerprint"]:
            raise FingerprintMismatch(
                f"{path}: checkpoint architecture {meta['fingerprint']} "
                f"(fusion={meta['model']['fusion']}, flow_branch={meta['model']['flow_branch']}) "
                f"!= expected {exp.fingerprint()} (fusion={exp.fusion.value}, flow_branch={exp.flow_branch})"
            )
    model = SegmentationNet(model_cfg)
    if meta.get("has_en_t"):
        model.en_t = init_target_encoder(model.en_s)
    params = canonical_parameters(model)
    try:
        with np.load(path, allow_pickle=False) as data:
            stored = {k: data[k] for k in data.files if k != "__meta__"}
    except (zipfile.BadZipFile, ValueError, OSError) as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from exc
    missing = sorted(set(params) - set(stored))
    if missing:
        raise CorruptCheckpoint(f"{path}: missing parameters {missing[:5]}")
    extra_names = sorted(k for k in stored if k not in params and not k.startswith("opt."))
    if extra_names:
        raise CorruptCheckpoint(f"{path}: unexpected entries {extra_names[:5]}")
    with torch.no_grad():
        for name, p in params.items():
            arr = stored[name]
            if tuple(arr.shape) != tuple(p.shape) or list(arr.shape) != meta["shapes"].get(name):
                raise CorruptCheckpoint(f"{path}: {name} has shape {arr.shape}, expected {tuple(p.shape)}")
            p.copy_(torch.from_numpy(arr))
    train_cfg = TrainConfig.from_flat(meta["train"]) if meta.get("train") else None
    opt_arrays = {k: v for k, v in stored.items() if k.startswith("opt.")}
    return Checkpoint(model, train_cfg, meta.get("extra", {}), opt_arrays)
