from .augment import AugmentParams, apply_augmentation, augment, pad_flow_channels, sample_augmentation
from .davis import DatasetHandle, Split, load_davis_layout, materialize_synthetic
from .flo import read_flo, write_flo
from .sample import Domain, FrameSample, make_sample, unlabeled_view
from .synthetic import (
    SOURCE_STYLE,
    TARGET_STYLE,
    AppearanceStyle,
    Motion,
    SyntheticSpec,
    flatten,
    generate_synthetic_dataset,
    generate_synthetic_sequence,
    render_sequence,
)

__all__ = [
    "AppearanceStyle", "AugmentParams", "DatasetHandle", "Domain", "FrameSample", "Motion",
    "SOURCE_STYLE", "Split", "SyntheticSpec", "TARGET_STYLE", "apply_augmentation", "augment",
    "flatten", "generate_synthetic_dataset", "generate_synthetic_sequence", "load_davis_layout",
    "make_sample", "materialize_synthetic", "pad_flow_channels", "read_flo", "render_sequence",
    "sample_augmentation", "unlabeled_view", "write_flo",
]
