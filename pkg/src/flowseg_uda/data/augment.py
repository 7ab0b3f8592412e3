from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CropTooLarge
from .sample import FrameSample

JITTER_GAIN = (0.8, 1.2)
JITTER_BIAS = (-0.1, 0.1)


@dataclass(frozen=True)
class AugmentParams:
    top: int
    left: int
    size: int
    flip: bool
    gain: np.ndarray | None = None  # per-channel, None disables jitter
    bias: np.ndarray | None = None


def sample_augmentation(shape, crop: int, rng: np.random.Generator, flip_prob: float = 0.5,
                        jitter: bool = True) -> AugmentParams:
    h, w = shape
    if crop > min(h, w):
        raise CropTooLarge(f"crop {crop} exceeds sample size {h}x{w}")
    top = int(rng.integers(0, h - crop + 1))
    left = int(rng.integers(0, w - crop + 1))
    flip = bool(rng.random() < flip_prob)
    gain = bias = None
    if jitter:
        gain = rng.uniform(*JITTER_GAIN, 3).astype(np.float32)
        bias = rng.uniform(*JITTER_BIAS, 3).astype(np.float32)
    return AugmentParams(top, left, crop, flip, gain, bias)


def apply_augmentation(sample: FrameSample, p: AugmentParams) -> FrameSample:
    """Apply one crop window and flip decision to image, flow and mask alike.

    A horizontal flip mirrors every array and also negates the u component of
    the flow. Colour jitter touches the image only.
    """
    win = (slice(p.top, p.top + p.size), slice(p.left, p.left + p.size))
    image = sample.image[win]
    flow = sample.flow[win]
    mask = sample._mask[win] if sample.has_label else None
    if p.flip:
        image = image[:, ::-1]
        flow = flow[:, ::-1] * np.array([-1.0, 1.0], dtype=np.float32)
        if mask is not None:
            mask = mask[:, ::-1]
    if p.gain is not None:
        image = np.clip(image * p.gain + p.bias, 0.0, 1.0)
    image = np.ascontiguousarray(image, dtype=np.float32)
    flow = np.ascontiguousarray(flow, dtype=np.float32)
    if mask is not None:
        mask = np.ascontiguousarray(mask)
    return FrameSample(image, flow, mask, sample.sequence_id, sample.frame_index, sample.domain)


def augment(sample: FrameSample, crop: int, rng: np.random.Generator, flip_prob: float = 0.5,
            jitter: bool = True) -> FrameSample:
    """Random square crop, horizontal flip and colour jitter."""
    return apply_augmentation(sample, sample_augmentation(sample.shape, crop, rng, flip_prob, jitter))


def pad_flow_channels(flow: np.ndarray) -> np.ndarray:
    """Append a constant-ones third channel so flow fits a 3-channel encoder."""
    flow = np.asarray(flow)
    ones = np.ones(flow.shape[:-1] + (1,), dtype=flow.dtype)
    return np.concatenate([flow, ones], axis=-1)
