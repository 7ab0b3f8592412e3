"""Desk-scale synthetic benchmarks with pinned data, model and budget.

Three settings:

* ``easy``: one moving object, no distractors.
* ``distractor``: one moving object plus static distractors drawn from the same
  appearance style, so appearance alone cannot tell them apart.
* ``shift``: a source/target pair that differ in palette, background texture and
  object shapes (the target is used without labels).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .data import TARGET_STYLE, Domain, SyntheticSpec
from .data.synthetic import generate_synthetic_sequence, render_sequence, sequence_seeds
from .evaluate import predict
from .metrics import binarize
from .model import ModelConfig
from .train import TrainConfig

CANVAS = {"height": 48, "width": 64, "length": 8, "object_size": (5.0, 8.0)}
DESK_MODEL = ModelConfig(widths=(16, 32, 32), flow_scale=2.4)


@dataclass
class Split:
    samples: list
    distractor_masks: list = field(default_factory=list)  # per sample, HxW bool

    def __len__(self):
        return len(self.samples)


def build_split(spec: SyntheticSpec, n_sequences: int, prefix: str) -> Split:
    """Render ``n_sequences`` sequences; keeps the visible static-distractor pixels per frame."""
    samples, dmasks = [], []
    for i, seed in enumerate(sequence_seeds(spec.seed, n_sequences)):
        sub = dataclasses.replace(spec, seed=seed)
        samples += generate_synthetic_sequence(sub, f"{prefix}{i:03d}")
        dmasks += render_sequence(sub).distractor_masks[1:]
    return Split(samples, dmasks)


def desk_config(steps: int, seed: int = 0, epochs: int = 5, **overrides) -> TrainConfig:
    """Supervised config at desk scale: ``steps`` SGD steps spread over ``epochs``."""
    if steps % epochs:
        raise ValueError(f"steps ({steps}) must be a multiple of epochs ({epochs})")
    base = TrainConfig(epochs=epochs, steps_per_epoch=steps // epochs, crop=48, batch_size=8,
                       lr=0.02, lr_decay=0.8, seed=seed,
                       model=dataclasses.replace(DESK_MODEL, init_seed=seed))
    return base.replace(**overrides) if overrides else base


@dataclass(frozen=True)
class Benchmark:
    name: str
    train_spec: SyntheticSpec
    val_spec: SyntheticSpec
    n_train: int
    n_val: int
    steps: int

    def train_split(self) -> Split:
        return build_split(self.train_spec, self.n_train, f"{self.name}-tr")

    def val_split(self) -> Split:
        return build_split(self.val_spec, self.n_val, f"{self.name}-va")

    def config(self, seed: int = 0, **overrides) -> TrainConfig:
        return desk_config(self.steps, seed, **overrides)


def _pair(seed: int, **kw) -> tuple[SyntheticSpec, SyntheticSpec]:
    train = SyntheticSpec(seed=seed, **{**CANVAS, **kw})
    return train, dataclasses.replace(train, seed=seed + 1)


EASY = Benchmark("easy", *_pair(31), n_train=20, n_val=8, steps=1500)
DISTRACTOR = Benchmark("distractor", *_pair(11, n_static_distractors=2), n_train=24, n_val=8, steps=3000)


@dataclass(frozen=True)
class ShiftBenchmark:
    """Labelled source domain, unlabelled target domain, labelled target validation."""

    source: Benchmark
    target_spec: SyntheticSpec
    target_val_spec: SyntheticSpec
    n_target: int
    n_target_val: int

    def target_split(self) -> Split:
        return build_split(self.target_spec, self.n_target, "shift-tgt")

    def target_val_split(self) -> Split:
        return build_split(self.target_val_spec, self.n_target_val, "shift-tgt-va")


def _shift(seed: int) -> ShiftBenchmark:
    src_train, src_val = _pair(seed)
    tgt = dataclasses.replace(src_train, seed=seed + 10, style=TARGET_STYLE, domain=Domain.TARGET)
    return ShiftBenchmark(Benchmark("shift-src", src_train, src_val, 24, 8, 1000),
                          tgt, dataclasses.replace(tgt, seed=seed + 11), 24, 8)


SHIFT = _shift(21)


def distractor_false_positive(model, split: Split, which: str = "s") -> float:
    """False-positive IoU on distractor regions, pooled over frames.

    False positives are predicted-foreground pixels outside the ground-truth
    mask; the score is their IoU with the visible static-distractor pixels.
    """
    inter = union = 0
    for sample, dmask in zip(split.samples, split.distractor_masks):
        pred = binarize(predict(model, sample, which))[..., 0].astype(bool)
        false_pos = pred & (sample.mask[..., 0] < 0.5)
        inter += int(np.count_nonzero(false_pos & dmask))
        union += int(np.count_nonzero(false_pos | dmask))
    return inter / union if union else 0.0
