from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import LabelAccessError, ShapeError


class Domain(str, enum.Enum):
    SOURCE = "source"
    TARGET = "target"


@dataclass(frozen=True, eq=False)
class FrameSample:
    """One timestep of a video: RGB image, flow against the previous frame, mask.

    ``image`` is HxWx3 float in [0, 1], ``flow`` is HxWx2 (u horizontal,
    v vertical, pixels/frame) and ``mask`` is HxWx1 in {0, 1} or ``None``.
    Reading ``mask`` on a sample without a label raises ``LabelAccessError``,
    which is how unsupervised training proves it never touches target labels.
    """

    image: np.ndarray
    flow: np.ndarray
    _mask: np.ndarray | None = field(repr=False)
    sequence_id: str
    frame_index: int
    domain: Domain = Domain.SOURCE

    def __post_init__(self):
        h, w = self.image.shape[:2]
        if self.image.shape != (h, w, 3):
            raise ShapeError(f"image must be HxWx3, got {self.image.shape}")
        if self.flow.shape != (h, w, 2):
            raise ShapeError(f"flow must be {h}x{w}x2, got {self.flow.shape}")
        if self._mask is not None and self._mask.shape != (h, w, 1):
            raise ShapeError(f"mask must be {h}x{w}x1, got {self._mask.shape}")
        if self.frame_index < 1:
            raise ValueError("frame_index must be >= 1; frame 0 is a flow anchor only")

    @property
    def has_label(self) -> bool:
        return self._mask is not None

    @property
    def mask(self) -> np.ndarray:
        if self._mask is None:
            raise LabelAccessError(
                f"{self.domain.value} sample {self.sequence_id}/{self.frame_index} carries no label"
            )
        return self._mask

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[:2]

    def unlabeled(self) -> FrameSample:
        return replace(self, _mask=None, domain=Domain.TARGET)

    def with_arrays(self, image=None, flow=None, mask=None) -> FrameSample:
        return replace(
            self,
            image=self.image if image is None else image,
            flow=self.flow if flow is None else flow,
            _mask=self._mask if mask is None else mask,
        )


def make_sample(image, flow, mask, sequence_id, frame_index, domain=Domain.SOURCE) -> FrameSample:
    image = np.asarray(image, dtype=np.float32)
    flow = np.asarray(flow, dtype=np.float32)
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float32)
        if mask.ndim == 2:
            mask = mask[..., None]
    return FrameSample(image, flow, mask, sequence_id, int(frame_index), Domain(domain))


def unlabeled_view(samples):
    """Wrap a sample collection so every item comes back without its label."""
    return _UnlabeledView(samples)


class _UnlabeledView:
    def __init__(self, samples):
        self._samples = samples

    def __len__(self):
        return len(self._samples)

    def __getitem__(self, i):
        src = self._samples
        if hasattr(src, "load"):
            return src.load(i, with_mask=False)
        return src[i].unlabeled()
