"""DAVIS-style directory layout.

::

    <root>/JPEGImages/<seq>/%05d.jpg
    <root>/Annotations/<seq>/%05d.png     (single channel, {0, 255})
    <root>/Flow/<seq>/%05d.flo            (optional)
    <root>/ImageSets/<split>.txt          (optional, one sequence name per line)

The first frame of each sequence is a flow anchor and never becomes a sample.
Samples are loaded lazily, so a handle over a large tree is cheap.
"""
from __future__ import annotations

import enum
import hashlib
import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import CountMismatch, LayoutError, ShapeError
from .flo import read_flo, write_flo
from .sample import Domain, FrameSample
from .synthetic import SyntheticSpec, render_sequence, sequence_seeds


class Split(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class FrameEntry:
    index: int
    image: Path
    mask: Path | None
    flow: Path | None


@dataclass(frozen=True)
class SequenceEntry:
    sequence_id: str
    frames: tuple[FrameEntry, ...]  # ordered; frames[0] is the flow anchor

    @property
    def samples(self) -> tuple[FrameEntry, ...]:
        return self.frames[1:]


class DatasetHandle:
    """Lazy, indexable view of a DAVIS-layout split.

    Indexing returns :class:`FrameSample` objects in (sequence, frame) order.
    """

    def __init__(self, root: Path, split: Split | None, sequences: list[SequenceEntry],
                 labeled: bool, domain: Domain):
        self.root = Path(root)
        self.split = split
        self.sequences = sequences
        self.labeled = labeled
        self.domain = domain
        self._index = [(seq, fr) for seq in sequences for fr in seq.samples]

    def __len__(self) -> int:
        return len(self._index)

    def __getitem__(self, i: int) -> FrameSample:
        return self.load(i, with_mask=self.labeled)

    def load(self, i: int, with_mask: bool = True) -> FrameSample:
        seq, fr = self._index[i]
        image = load_image(fr.image)
        if fr.flow is None:
            raise LayoutError(f"no flow file for {seq.sequence_id}/{fr.index:05d}")
        flow = read_flo(fr.flow)
        if flow.shape[:2] != image.shape[:2]:
            raise ShapeError(
                f"flow {flow.shape[:2]} does not match image {image.shape[:2]} for "
                f"{seq.sequence_id}/{fr.index:05d}"
            )
        mask = None
        domain = self.domain
        if with_mask and fr.mask is not None:
            mask = load_mask(fr.mask)
        elif fr.mask is None:
            domain = Domain.TARGET
        if not with_mask:
            domain = Domain.TARGET
        return FrameSample(image, flow, mask, seq.sequence_id, fr.index, domain)

    def evaluable(self) -> list[int]:
        """Indices of samples that carry ground truth."""
        return [i for i, (_, fr) in enumerate(self._index) if fr.mask is not None]

    def unlabeled(self):
        from .sample import unlabeled_view

        return unlabeled_view(self)

    def __repr__(self):
        return (f"DatasetHandle(root={str(self.root)!r}, split={self.split}, "
                f"sequences={len(self.sequences)}, samples={len(self)})")


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 127).astype(np.float32)[..., None]


def _indexed(directory: Path, suffix: str) -> dict[int, Path]:
    out = {}
    for p in directory.iterdir():
        if p.suffix.lower() == suffix and p.stem.isdigit():
            out[int(p.stem)] = p
    return out


def load_davis_layout(root, split=None, labeled: bool = True,
                      domain: Domain | None = None) -> DatasetHandle:
    """Index a DAVIS-style tree.

    With ``labeled=True`` the ``Annotations`` tree must exist for every sequence;
    individual frames may still lack annotations (they load unlabeled).
    """
    root = Path(root)
    split = Split(split) if split is not None else None
    images_dir = root / "JPEGImages"
    if not images_dir.is_dir():
        raise LayoutError(f"missing directory {images_dir}")
    ann_dir = root / "Annotations"
    flow_dir = root / "Flow"
    if labeled and not ann_dir.is_dir():
        raise LayoutError(f"missing directory {ann_dir}")

    names = None
    if split is not None:
        listing = root / "ImageSets" / f"{split.value}.txt"
        if listing.is_file():
            names = [ln.strip() for ln in listing.read_text().splitlines() if ln.strip()]
    if names is None:
        names = sorted(p.name for p in images_dir.iterdir() if p.is_dir())

    sequences = []
    for name in names:
        seq_images = images_dir / name
        if not seq_images.is_dir():
            raise LayoutError(f"missing directory {seq_images}")
        images = _indexed(seq_images, ".jpg")
        masks: dict[int, Path] = {}
        if labeled:
            seq_ann = ann_dir / name
            if not seq_ann.is_dir():
                raise LayoutError(f"missing directory {seq_ann}")
            masks = _indexed(seq_ann, ".png")
            orphans = sorted(set(masks) - set(images))
            if orphans:
                raise CountMismatch(
                    f"{name}: {len(masks)} annotations vs {len(images)} images; "
                    f"no image for frames {orphans[:5]}"
                )
        elif (ann_dir / name).is_dir():
            masks = _indexed(ann_dir / name, ".png")
        flows = _indexed(flow_dir / name, ".flo") if (flow_dir / name).is_dir() else {}
        frames = tuple(
            FrameEntry(i, images[i], masks.get(i), flows.get(i)) for i in sorted(images)
        )
        sequences.append(SequenceEntry(name, frames))
    if domain is None:
        domain = Domain.SOURCE if labeled else Domain.TARGET
    return DatasetHandle(root, split, sequences, labeled, domain)


def _save_image(arr: np.ndarray, path: Path) -> None:
    Image.fromarray(np.round(np.clip(arr, 0, 1) * 255).astype(np.uint8)).save(path, quality=95)


def _save_mask(mask: np.ndarray, path: Path) -> None:
    Image.fromarray((mask[..., 0] > 0.5).astype(np.uint8) * 255, mode="L").save(path)


def spec_hash(spec: SyntheticSpec, extra: dict | None = None) -> str:
    payload = {"spec": spec.to_dict(), **(extra or {})}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=list).encode()).hexdigest()


def materialize_synthetic(spec: SyntheticSpec, root, n_train: int, n_test: int,
                          prefix: str = "seq") -> dict:
    """Render ``n_train + n_test`` sequences into a DAVIS tree under ``root``.

    Returns the manifest (also written to ``root/manifest.json``).
    """
    root = Path(root)
    for sub in ("JPEGImages", "Annotations", "Flow", "ImageSets"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    n = n_train + n_test
    names = [f"{prefix}{i:03d}" for i in range(n)]
    file_hashes = {}
    for name, seed in zip(names, sequence_seeds(spec.seed, n)):
        seq = render_sequence(replace(spec, seed=seed))
        for sub in ("JPEGImages", "Annotations", "Flow"):
            (root / sub / name).mkdir(exist_ok=True)
        for t, (img, mask, flow) in enumerate(zip(seq.images, seq.masks, seq.flows)):
            _save_image(img, root / "JPEGImages" / name / f"{t:05d}.jpg")
            _save_mask(mask, root / "Annotations" / name / f"{t:05d}.png")
            if t > 0:
                write_flo(flow, root / "Flow" / name / f"{t:05d}.flo")
    (root / "ImageSets" / "train.txt").write_text("".join(f"{s}\n" for s in names[:n_train]))
    (root / "ImageSets" / "test.txt").write_text("".join(f"{s}\n" for s in names[n_train:]))
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            file_hashes[p.relative_to(root).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = {
        "seed": spec.seed,
        "spec_hash": spec_hash(spec, {"n_train": n_train, "n_test": n_test, "prefix": prefix}),
        "spec": spec.to_dict(),
        "n_train": n_train,
        "n_test": n_test,
        "content_hash": hashlib.sha256(json.dumps(file_hashes, sort_keys=True).encode()).hexdigest(),
    }
    tmp = root / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=list))
    os.replace(tmp, root / "manifest.json")
    return manifest
