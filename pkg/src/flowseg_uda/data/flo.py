"""Middlebury ``.flo`` reader/writer.

Layout (little-endian): float32 magic 202021.25, int32 width, int32 height,
then ``height * width`` interleaved float32 ``(u, v)`` pairs in row-major order.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..errors import IoFailure, MagicMismatch, TruncatedFile

FLO_MAGIC = np.float32(202021.25)
HEADER_BYTES = 12


def read_flo(path) -> np.ndarray:
    """Return an ``(H, W, 2)`` float32 array."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_BYTES:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, header needs {HEADER_BYTES}")
    magic = np.frombuffer(raw, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise MagicMismatch(f"{path}: magic {magic!r} != 202021.25")
    width, height = (int(x) for x in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if width < 0 or height < 0:
        raise TruncatedFile(f"{path}: negative dimensions {width}x{height}")
    expected = HEADER_BYTES + 8 * width * height
    if len(raw) != expected:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, expected {expected} for {width}x{height}")
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER_BYTES)
    return data.reshape(height, width, 2).astype(np.float32)


def encode_flo(flow: np.ndarray) -> bytes:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be HxWx2, got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    height, width = flow.shape[:2]
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes() + np.array([width, height], dtype="<i4").tobytes()
    return header + np.ascontiguousarray(flow, dtype="<f4").tobytes()


def write_flo(flow: np.ndarray, path) -> None:
    payload = encode_flo(flow)
    try:
        with open(os.fspath(path), "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
