"""Supervised and adversarial losses.

All losses are minimised quantities. Probabilities are clamped to
``[eps, 1 - eps]`` before any logarithm; reductions are means over pixels and
samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ShapeError

DEFAULT_EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    alpha1: float = 0.5
    alpha2: float = 0.5
    beta1: float = 1.0
    beta2: float = 0.5
    lambda1: float = 0.0
    lambda2: float = 0.5
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta1", "beta2", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")


def _as_tensor(x):
    return x if torch.is_tensor(x) else torch.as_tensor(x, dtype=torch.float64)


def _clamp(p, eps):
    return _as_tensor(p).clamp(eps, 1.0 - eps)


def mask_loss(y, y_hat, eps: float = DEFAULT_EPS):
    """Binary cross-entropy between a binary mask and predicted probabilities."""
    y, y_hat = _as_tensor(y), _as_tensor(y_hat)
    if y.shape != y_hat.shape:
        raise ShapeError(f"mask {tuple(y.shape)} vs prediction {tuple(y_hat.shape)}")
    p = _clamp(y_hat, eps)
    return -(y * torch.log(p) + (1 - y) * torch.log(1 - p)).mean()


def supervised_loss(y, y_hat_main, y_hat_flow, w: LossWeights = LossWeights()):
    """``alpha1 * BCE(main) + alpha2 * BCE(flow)``; the flow term is skipped when absent."""
    return supervised_terms(y, y_hat_main, y_hat_flow, w)[0]


def supervised_terms(y, y_hat_main, y_hat_flow, w: LossWeights = LossWeights()):
    """``(total, main BCE, flow BCE or None)`` for logging alongside the total."""
    main = mask_loss(y, y_hat_main, w.eps)
    if y_hat_flow is None:
        return w.alpha1 * main, main, None
    flow = mask_loss(y, y_hat_flow, w.eps)
    return w.alpha1 * main + w.alpha2 * flow, main, flow


def neg_log_mean(p, eps: float = DEFAULT_EPS):
    """``-mean(log p)``, the "judged as source" term shared by both adversarial losses."""
    return -torch.log(_clamp(p, eps)).mean()


def confusion_loss(d_target, eps: float = DEFAULT_EPS):
    """Encoder objective: make the discriminator call target features source."""
    return neg_log_mean(d_target, eps)


def discriminator_loss(d_source, d_target, eps: float = DEFAULT_EPS):
    """Source labelled 1, target labelled 0."""
    return neg_log_mean(d_source, eps) + neg_log_mean(1 - _as_tensor(d_target), eps)


def uda_loss(l_ent, l_d, w: LossWeights = LossWeights()):
    return w.beta1 * l_ent + w.beta2 * l_d


def shared_loss(l_s, l_ent, l_d, w: LossWeights = LossWeights()):
    return l_s + w.lambda1 * l_ent + w.lambda2 * l_d
