"""Region similarity J and boundary accuracy F with DAVIS-style statistics."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyInput, ShapeError


@dataclass(frozen=True)
class FrameScore:
    sequence_id: str
    frame_index: int
    j: float
    f: float


def binarize(prob, threshold: float = 0.5) -> np.ndarray:
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    return (np.asarray(prob) > threshold).astype(np.uint8)


def _pair(pred, gt):
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return pred, gt


def _squeeze2d(m):
    return m[..., 0] if m.ndim == 3 and m.shape[-1] == 1 else m


def jaccard(pred, gt) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    pred, gt = _pair(pred, gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def boundary(mask) -> np.ndarray:
    """Foreground pixels whose 4-neighbourhood touches background or the image edge."""
    m = np.pad(np.asarray(mask).astype(bool), 1, constant_values=False)
    core = m[1:-1, 1:-1]
    interior = m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:]
    return core & ~interior


def default_tolerance(shape) -> int:
    h, w = shape[:2]
    return int(math.ceil(0.0075 * math.hypot(h, w)))


def f_measure(pred, gt, tol_radius: float | None = None) -> float:
    pred, gt = _pair(pred, gt)
    pred, gt = _squeeze2d(pred), _squeeze2d(gt)
    if tol_radius is None:
        tol_radius = default_tolerance(gt.shape)
    bp, bg = boundary(pred), boundary(gt)
    n_p, n_g = np.count_nonzero(bp), np.count_nonzero(bg)
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    # distance from every pixel to the nearest boundary pixel of the other mask
    dist_to_gt = ndimage.distance_transform_edt(~bg)
    dist_to_pred = ndimage.distance_transform_edt(~bp)
    precision = np.count_nonzero(dist_to_gt[bp] <= tol_radius) / n_p
    recall = np.count_nonzero(dist_to_pred[bg] <= tol_radius) / n_g
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _edge_window(n: int) -> int:
    return max(1, n // 4)


def sequence_decay(scores) -> float:
    """Mean of the first temporal quarter minus mean of the last quarter.

    Both quarters hold ``max(1, n // 4)`` frames, so reversing a sequence
    exactly negates its decay.
    """
    s = np.asarray(scores, dtype=np.float64)
    k = _edge_window(len(s))
    # fsum is order independent, so the reversed sequence gives the exact negation
    return (math.fsum(s[:k]) - math.fsum(s[-k:])) / k


def group_by_sequence(per_frame) -> dict[str, np.ndarray]:
    groups = defaultdict(list)
    for fs in per_frame:
        groups[fs.sequence_id].append(fs)
    return {
        seq: sorted(items, key=lambda fs: fs.frame_index)
        for seq, items in sorted(groups.items())
    }


def statistics(per_frame, attr: str = "j", recall_threshold: float = 0.5):
    """(mean, recall, decay) of one score, averaged per sequence first."""
    groups = group_by_sequence(per_frame)
    if not groups:
        raise EmptyInput("no frames to summarise")
    means, recalls, decays = [], [], []
    for items in groups.values():
        s = np.array([getattr(fs, attr) for fs in items], dtype=np.float64)
        means.append(s.mean())
        recalls.append(np.mean(s > recall_threshold))
        decays.append(sequence_decay(s))
    return float(np.mean(means)), float(np.mean(recalls)), float(np.mean(decays))


def j_statistics(per_frame, recall_threshold: float = 0.5):
    return statistics(per_frame, "j", recall_threshold)


def f_statistics(per_frame, recall_threshold: float = 0.5):
    return statistics(per_frame, "f", recall_threshold)
