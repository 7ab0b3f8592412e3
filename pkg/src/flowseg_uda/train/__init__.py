from .checkpoint import Checkpoint, load_checkpoint, read_meta, save_checkpoint
from .config import CONFIG_SCHEMA, ConfigError, Regime, TrainConfig
from .loops import (
    HISTORY_COLUMNS,
    BatchStream,
    StepRecord,
    TrainHistory,
    discriminator_accuracy,
    train,
    train_supervised,
    train_uda_separated,
    train_uda_shared,
)
from .optim import SGD, lambda1_schedule, lr_schedule, sgd_step

__all__ = [
    "BatchStream", "CONFIG_SCHEMA", "Checkpoint", "ConfigError", "HISTORY_COLUMNS", "Regime", "SGD",
    "StepRecord", "TrainConfig", "TrainHistory", "discriminator_accuracy", "lambda1_schedule",
    "load_checkpoint", "lr_schedule", "read_meta", "save_checkpoint", "sgd_step", "train", "train_supervised",
    "train_uda_separated", "train_uda_shared",
]
