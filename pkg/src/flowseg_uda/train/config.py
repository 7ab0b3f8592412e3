"""Run configuration: one flat key/value namespace covering optimiser, losses and model."""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import UsageError
from ..losses import LossWeights
from ..model import FusionMode, ModelConfig


class Regime(str, enum.Enum):
    SUPERVISED = "supervised"
    UDA_SHARED = "shared"
    UDA_SEPARATED = "separated"


class ConfigError(UsageError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    regime: Regime = Regime.SUPERVISED
    epochs: int = 100
    batch_size: int = 8
    lr: float = 0.004
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay: float = 0.97
    disc_momentum: float = 0.0  # shared-regime discriminator
    uda_epochs: int = 20  # separated regime
    uda_lr: float = 1e-4
    uda_momentum: float = 0.9
    m_iters: int = 5  # encoder iterations per separated-regime step
    n_iters: int = 5  # discriminator iterations per separated-regime step
    steps_per_epoch: int | None = None  # None: one pass over the epoch's driving dataset
    flow_supervision: bool = True
    crop: int = 384
    flip_prob: float = 0.5
    jitter: bool = True
    seed: int = 0
    deterministic: bool = True
    source: str | None = None
    target: str | None = None
    warm_start: str | None = None
    weights: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.regime is Regime.UDA_SEPARATED and (self.m_iters < 1 or self.n_iters < 1):
            raise ConfigError("m_iters and n_iters must be >= 1 in the separated regime")
        if self.batch_size < 1 or self.epochs < 0 or self.uda_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epoch counts >= 0")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ConfigError("steps_per_epoch must be >= 1")

    def replace(self, **changes) -> TrainConfig:
        """Copy with flat-key overrides (loss and model keys included)."""
        return TrainConfig.from_flat({**self.to_flat(), **changes})

    def to_flat(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in ("weights", "model"):
                continue
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else v
        out.update(asdict(self.weights))
        out.update(self.model.to_dict())
        return out

    @classmethod
    def from_flat(cls, flat: dict) -> TrainConfig:
        own = {f.name for f in fields(cls)} - {"weights", "model"}
        weight_keys = {f.name for f in fields(LossWeights)}
        model_keys = {f.name for f in fields(ModelConfig)}
        unknown = sorted(set(flat) - own - weight_keys - model_keys)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in flat.items():
            _check_type(key, value)
        try:
            weights = LossWeights(**{k: float(v) for k, v in flat.items() if k in weight_keys})
            model_args = {k: v for k, v in flat.items() if k in model_keys}
            if "fusion" in model_args:
                model_args["fusion"] = FusionMode(model_args["fusion"])
            model = ModelConfig(**model_args)
            return cls(weights=weights, model=model, **{k: v for k, v in flat.items() if k in own})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_flat(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> TrainConfig:
        try:
            flat = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(flat, dict):
            raise ConfigError(f"{path}: top level must be a key/value object")
        return cls.from_flat(flat)


# key -> (accepted python types, description); the published config schema
CONFIG_SCHEMA = {
    "regime": ((str,), "supervised | shared | separated"),
    "epochs": ((int,), "supervised / shared-regime epochs"),
    "batch_size": ((int,), "samples per batch"),
    "lr": ((float, int), "base learning rate"),
    "momentum": ((float, int), "SGD momentum"),
    "weight_decay": ((float, int), "L2 weight decay"),
    "lr_decay": ((float, int), "per-epoch exponential decay factor"),
    "disc_momentum": ((float, int), "discriminator momentum, shared regime"),
    "uda_epochs": ((int,), "separated-regime epochs"),
    "uda_lr": ((float, int), "separated-regime learning rate"),
    "uda_momentum": ((float, int), "separated-regime momentum"),
    "m_iters": ((int,), "encoder iterations per separated step (M)"),
    "n_iters": ((int,), "discriminator iterations per separated step (N)"),
    "steps_per_epoch": ((int, type(None)), "null: one pass over the driving dataset"),
    "flow_supervision": ((bool,), "train the auxiliary flow decoder"),
    "crop": ((int,), "square training crop"),
    "flip_prob": ((float, int), "horizontal flip probability"),
    "jitter": ((bool,), "colour jitter on/off"),
    "seed": ((int,), "run seed"),
    "deterministic": ((bool,), "force deterministic kernels"),
    "source": ((str, type(None)), "source dataset root"),
    "target": ((str, type(None)), "target dataset root"),
    "warm_start": ((str, type(None)), "checkpoint to start the shared regime from"),
    "alpha1": ((float, int), "main mask loss weight"),
    "alpha2": ((float, int), "flow mask loss weight"),
    "beta1": ((float, int), "confusion loss weight, separated regime"),
    "beta2": ((float, int), "discriminator loss weight, separated regime"),
    "lambda1": ((float, int), "confusion weight (overridden by the epoch schedule)"),
    "lambda2": ((float, int), "discriminator loss weight, shared regime"),
    "eps": ((float,), "probability clamp"),
    "widths": ((list, tuple), "encoder stage widths; stride is 2**len"),
    "fusion": ((str,), "conv | product | addition"),
    "flow_branch": ((bool,), "false: appearance-only baseline"),
    "disc_widths": ((list, tuple), "three discriminator conv widths"),
    "flow_scale": ((float, int), "flow is divided by this before encoding"),
    "init_seed": ((int,), "parameter init seed"),
}


def _check_type(key, value):
    if key not in CONFIG_SCHEMA:
        return
    accepted, _ = CONFIG_SCHEMA[key]
    ok = isinstance(value, accepted) and not (isinstance(value, bool) and bool not in accepted)
    if isinstance(value, enum.Enum):
        ok = True
    if not ok:
        names = "/".join(t.__name__ for t in accepted)
        raise ConfigError(f"config key {key!r}: expected {names}, got {type(value).__name__} {value!r}")


def with_regime(config: TrainConfig, regime) -> TrainConfig:
    return replace(config, regime=Regime(regime))
