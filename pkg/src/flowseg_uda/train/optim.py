from __future__ import annotations

import math

import torch

from ..errors import NonFiniteGradient


def lr_schedule(base_lr: float, epoch: int, decay_factor: float) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return base_lr * decay_factor ** epoch


def lambda1_schedule(epoch: int, max_epoch: int) -> float:
    if not 0 <= epoch <= max_epoch:
        raise ValueError(f"epoch {epoch} outside [0, {max_epoch}]")
    if max_epoch == 0:
        return 0.0
    return epoch / max_epoch


@torch.no_grad()
def sgd_step(params: dict, grads: dict, lr: float, momentum: float, weight_decay: float,
             state: dict, step=None):
    """One momentum-SGD update, in place.

    ``v <- momentum * v + (grad + weight_decay * p)``; ``p <- p - lr * v``.
    All gradients are checked before anything is mutated, so a non-finite
    gradient leaves parameters and state untouched.
    """
    for name, g in grads.items():
        if g is not None and not torch.isfinite(g).all():
            raise NonFiniteGradient(name, step)
    for name, g in grads.items():
        if g is None:
            continue
        p = params[name]
        d = g + weight_decay * p if weight_decay else g.clone()
        v = state.get(name)
        if v is None or momentum == 0:
            v = d
        else:
            v.mul_(momentum).add_(d)
        state[name] = v
        p.sub_(lr * v)
    return params, state


class SGD:
    """Momentum SGD over a named parameter set, driven by :func:`sgd_step`."""

    def __init__(self, named_params, momentum: float, weight_decay: float):
        self.params = dict(named_params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.state: dict[str, torch.Tensor] = {}

    def step(self, lr: float, names=None, step=None):
        keys = self.params if names is None else names
        grads = {k: self.params[k].grad for k in keys}
        sgd_step(self.params, grads, lr, self.momentum, self.weight_decay, self.state, step)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_arrays(self, prefix: str) -> dict:
        return {f"{prefix}.{k}": v.detach().cpu().numpy() for k, v in self.state.items()}

    def load_state_arrays(self, arrays: dict, prefix: str):
        self.state = {}
        for key, arr in arrays.items():
            if key.startswith(prefix + "."):
                name = key[len(prefix) + 1:]
                ref = self.params[name]
                self.state[name] = torch.from_numpy(arr.copy()).to(ref.dtype)


def finite_or_raise(value: float, what: str, step: int):
    from ..errors import NonFiniteValue

    if not math.isfinite(value):
        raise NonFiniteValue(f"{what} is {value} at step {step}")
    return value
