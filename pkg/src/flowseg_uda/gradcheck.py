"""Central finite-difference check of autodiff gradients, per parameter group."""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .model import parameter_groups


@dataclass(frozen=True)
class GroupCheck:
    group: str
    n_params: int
    rel_error: float
    grad_norm: float

    def ok(self, tol: float = 1e-3) -> bool:
        return self.rel_error <= tol


def relative_error(a: torch.Tensor, b: torch.Tensor, floor: float = 1e-12) -> float:
    """``|a - b| / max(|a|, |b|)`` in the Euclidean norm; 0 when both vanish."""
    scale = max(float(a.norm()), float(b.norm()))
    if scale < floor:
        return 0.0
    return float((a - b).norm()) / scale


@torch.no_grad()
def _numeric(loss_fn, p: torch.nn.Parameter, step: float) -> torch.Tensor:
    flat = p.view(-1)
    out = torch.empty_like(flat)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + step
        up = loss_fn().item()
        flat[i] = orig - step
        down = loss_fn().item()
        flat[i] = orig
        out[i] = (up - down) / (2 * step)
    return out.view_as(p)


def check_gradients(model, loss_fn, step: float = 1e-5, groups=None) -> list[GroupCheck]:
    """Compare ``loss_fn()``'s autodiff gradient with central differences.

    ``model`` should be in double precision; ``loss_fn`` must be a pure function
    of the current parameter values.
    """
    named = parameter_groups(model)
    if groups is not None:
        named = {k: v for k, v in named.items() if k in groups}
    params = [p for items in named.values() for _, p in items]
    model.zero_grad(set_to_none=True)
    loss_fn().backward()
    analytic = {id(p): (p.grad.clone() if p.grad is not None else torch.zeros_like(p)) for p in params}
    model.zero_grad(set_to_none=True)

    report = []
    for key, items in named.items():
        a = torch.cat([analytic[id(p)].reshape(-1) for _, p in items])
        n = torch.cat([_numeric(loss_fn, p, step).reshape(-1) for _, p in items])
        report.append(GroupCheck(key, a.numel(), relative_error(a, n), float(a.norm())))
    return report
