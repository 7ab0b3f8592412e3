"""Offline evaluation of a frozen model: per-frame J/F rolled up per sequence and per dataset."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import MissingGroundTruth
from .metrics import FrameScore, binarize, f_measure, f_statistics, group_by_sequence, j_statistics, jaccard
from .model import SegmentationNet, to_tensors


@dataclass
class EvalReport:
    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float
    f_recall: float
    f_decay: float
    per_sequence: dict[str, dict]
    n_frames: int
    fingerprint: str | None = None
    frames: list[FrameScore] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "n_frames": self.n_frames,
            "n_sequences": len(self.per_sequence),
            "J": {"mean": self.j_mean, "recall": self.j_recall, "decay": self.j_decay},
            "F": {"mean": self.f_mean, "recall": self.f_recall, "decay": self.f_decay},
            "per_sequence": self.per_sequence,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def sequence_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sequence", "n_frames", "j_mean", "f_mean"])
        for seq, row in self.per_sequence.items():
            writer.writerow([seq, row["n_frames"], f"{row['j_mean']:.6f}", f"{row['f_mean']:.6f}"])
        return buf.getvalue()

    def table(self) -> str:
        lines = [
            f"{'':8}{'Mean':>8}{'Recall':>8}{'Decay':>8}",
            f"{'J':8}{self.j_mean * 100:8.1f}{self.j_recall * 100:8.1f}{self.j_decay * 100:8.1f}",
            f"{'F':8}{self.f_mean * 100:8.1f}{self.f_recall * 100:8.1f}{self.f_decay * 100:8.1f}",
            "",
            f"{'sequence':20}{'J mean':>8}{'F mean':>8}",
        ]
        for seq, row in self.per_sequence.items():
            lines.append(f"{seq:20}{row['j_mean'] * 100:8.1f}{row['f_mean'] * 100:8.1f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n")
        (out / "report.txt").write_text(self.table())
        (out / "per_sequence.csv").write_text(self.sequence_csv())


def score_frames(triples, tol_radius=None) -> list[FrameScore]:
    """``triples`` of ``(sample, binary prediction HxW[x1])`` against each sample's mask."""
    scores = []
    for sample, pred in triples:
        gt = sample.mask[..., 0]
        pred = np.asarray(pred).reshape(gt.shape)
        scores.append(FrameScore(sample.sequence_id, sample.frame_index,
                                 jaccard(pred, gt), f_measure(pred, gt, tol_radius)))
    return scores


def summarize(scores: list[FrameScore], fingerprint=None, recall_threshold=0.5) -> EvalReport:
    j = j_statistics(scores, recall_threshold)
    f = f_statistics(scores, recall_threshold)
    per_seq = {}
    for seq, items in group_by_sequence(scores).items():
        per_seq[seq] = {
            "n_frames": len(items),
            "j_mean": float(np.mean([fs.j for fs in items])),
            "f_mean": float(np.mean([fs.f for fs in items])),
        }
    return EvalReport(*j, *f, per_sequence=per_seq, n_frames=len(scores),
                      fingerprint=fingerprint, frames=scores)


def _labeled_samples(dataset):
    if hasattr(dataset, "evaluable"):
        idx = dataset.evaluable()
        if not idx:
            raise MissingGroundTruth(f"no annotated frames in {dataset!r}")
        return [dataset.load(i, with_mask=True) for i in idx]
    samples = list(dataset)
    labeled = [s for s in samples if s.has_label]
    if not labeled:
        missing = [f"{s.sequence_id}/{s.frame_index}" for s in samples[:10]]
        raise MissingGroundTruth(f"no ground truth for frames {missing}")
    return labeled


@torch.no_grad()
def predict(model: SegmentationNet, sample, which: str = "s") -> np.ndarray:
    image, flow3, _ = to_tensors([sample], model.config.flow_scale, with_mask=False,
                                 dtype=next(model.parameters()).dtype)
    return model.segment(image, flow3, which)[0].permute(1, 2, 0).numpy()


def evaluate_model(model: SegmentationNet, dataset, which: str = "s", threshold: float = 0.5,
                   tol_radius=None) -> EvalReport:
    was_training = model.training
    model.eval()
    try:
        samples = _labeled_samples(dataset)
        triples = [(s, binarize(predict(model, s, which), threshold)) for s in samples]
    finally:
        model.train(was_training)
    return summarize(score_frames(triples, tol_radius), model.config.fingerprint())


def evaluate_oracle(dataset, tol_radius=None) -> EvalReport:
    """Ground truth scored against itself."""
    samples = _labeled_samples(dataset)
    return summarize(score_frames([(s, s.mask) for s in samples], tol_radius))


def evaluate_dataset(model_ckpt, dataset, threshold: float = 0.5, tol_radius=None,
                     which: str = "s", split="test") -> EvalReport:
    """Evaluate a checkpoint path or model on a dataset root, handle or sample list."""
    from .data.davis import load_davis_layout
    from .train.checkpoint import load_checkpoint

    model = model_ckpt
    if isinstance(model_ckpt, (str, Path)):
        model = load_checkpoint(model_ckpt).model
    elif hasattr(model_ckpt, "model"):
        model = model_ckpt.model
    if isinstance(dataset, (str, Path)):
        dataset = load_davis_layout(dataset, split, labeled=True)
    return evaluate_model(model, dataset, which, threshold, tol_radius)
