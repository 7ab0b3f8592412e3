"""Supervised training and the two adversarial adaptation regimes.

All three procedures share one epoch/step harness: a seeded batch stream per
domain, momentum SGD, exponential learning-rate decay per epoch, optional
per-epoch validation and resumable per-epoch checkpoints.
"""
from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from ..data.augment import augment
from ..data.sample import unlabeled_view
from ..evaluate import evaluate_model
from ..losses import confusion_loss, discriminator_loss, supervised_terms
from ..model import SegmentationNet, canonical_parameters, pad_to_multiple, to_tensors
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Regime, TrainConfig
from .optim import SGD, finite_or_raise, lambda1_schedule, lr_schedule


@dataclass
class StepRecord:
    step: int
    epoch: int
    l_s: float = 0.0
    l_msk_main: float = 0.0
    l_msk_flow: float = 0.0
    l_ent: float = 0.0
    l_d: float = 0.0
    lambda1: float = 0.0
    lr: float = 0.0
    disc_acc: float = 0.0


HISTORY_COLUMNS = tuple(f.name for f in fields(StepRecord))


@dataclass
class TrainHistory:
    """Per-step loss records plus per-epoch validation scores.

    Loss columns a regime does not compute are recorded as 0.0.
    """

    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.steps])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in self.steps:
            w.writerow([repr(v) for v in astuple(r)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def to_state(self) -> dict:
        return {"steps": [list(astuple(r)) for r in self.steps], "epochs": self.epochs}

    @classmethod
    def from_state(cls, state: dict) -> TrainHistory:
        return cls([StepRecord(*row) for row in state["steps"]], list(state["epochs"]))


class BatchStream:
    """Endless seeded stream of augmented batches, reshuffled every pass."""

    def __init__(self, samples, batch_size: int, rng: np.random.Generator, crop: int,
                 flip_prob: float = 0.5, jitter: bool = True):
        if len(samples) == 0:
            raise ValueError("empty dataset")
        self.samples = samples
        self.batch_size = batch_size
        self.rng = rng
        self.crop = crop
        self.flip_prob = flip_prob
        self.jitter = jitter
        self.order: list[int] = []
        self.pos = 0

    def next(self):
        batch = []
        while len(batch) < self.batch_size:
            if self.pos >= len(self.order):
                self.order = [int(i) for i in self.rng.permutation(len(self.samples))]
                self.pos = 0
            batch.append(self.samples[self.order[self.pos]])
            self.pos += 1
        return [augment(s, self.crop, self.rng, self.flip_prob, self.jitter) for s in batch]

    def state(self) -> dict:
        return {"rng": self.rng.bit_generator.state, "order": self.order, "pos": self.pos}

    def set_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state["rng"]
        self.order = list(state["order"])
        self.pos = int(state["pos"])


def _setup(cfg: TrainConfig):
    torch.use_deterministic_algorithms(cfg.deterministic)
    torch.manual_seed(cfg.seed)
    return [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2)]


def _named(model, prefixes):
    params = canonical_parameters(model)
    return {n: p for n, p in params.items() if n.split(".")[0] in prefixes}


def _stream(samples, cfg, rng):
    return BatchStream(samples, cfg.batch_size, rng, cfg.crop, cfg.flip_prob, cfg.jitter)


def _disc_accuracy(d_source, d_target) -> float:
    correct = (d_source > 0.5).sum() + (d_target <= 0.5).sum()
    return float(correct) / (d_source.numel() + d_target.numel())


class _Harness:
    def __init__(self, cfg, model, streams, optimizers, epochs, base_lr, steps_per_epoch,
                 out_dir=None, val=None, hook=None):
        self.cfg = cfg
        self.model = model
        self.streams = streams
        self.optimizers = optimizers
        self.epochs = epochs
        self.base_lr = base_lr
        self.steps_per_epoch = steps_per_epoch
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.val = val or {}
        self.hook = hook
        self.history = TrainHistory()
        self.start_epoch = 0
        self.global_step = 0

    def resume(self, path):
        ckpt = load_checkpoint(path, self.cfg)
        with torch.no_grad():
            src = canonical_parameters(ckpt.model)
            for name, p in canonical_parameters(self.model).items():
                p.copy_(src[name])
        for key, opt in self.optimizers.items():
            opt.load_state_arrays(ckpt.optimizer_arrays, f"opt.{key}")
        state = ckpt.extra["run"]
        for key, s in self.streams.items():
            s.set_state(state["streams"][key])
        self.history = TrainHistory.from_state(state["history"])
        self.start_epoch = state["epoch"]
        self.global_step = state["global_step"]

    def notify(self, stage):
        if self.hook is not None:
            self.hook(stage, self.model)

    def run(self, step_fn):
        for epoch in range(self.start_epoch, self.epochs):
            lr = lr_schedule(self.base_lr, epoch, self.cfg.lr_decay)
            lam = lambda1_schedule(epoch, self.epochs)
            for _ in range(self.steps_per_epoch):
                rec = StepRecord(self.global_step, epoch, lambda1=lam, lr=lr)
                step_fn(rec, lr, lam)
                for name in HISTORY_COLUMNS[2:]:
                    finite_or_raise(getattr(rec, name), name, self.global_step)
                self.history.steps.append(rec)
                self.global_step += 1
            summary = {"epoch": epoch, "lr": lr, "lambda1": lam}
            for key, (dataset, which) in self.val.items():
                summary[f"val_j_{key}"] = evaluate_model(self.model, dataset, which).j_mean
            self.history.epochs.append(summary)
            if self.out_dir is not None:
                self.save(self.out_dir / f"epoch_{epoch + 1:03d}.npz", epoch + 1)
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(self.model, self.cfg, self.out_dir / "checkpoint.npz")
            self.history.write_csv(self.out_dir / "history.csv")
        return self.model, self.history

    def save(self, path, epoch):
        run = {
            "epoch": epoch,
            "global_step": self.global_step,
            "streams": {k: s.state() for k, s in self.streams.items()},
            "history": self.history.to_state(),
        }
        save_checkpoint(self.model, self.cfg, path, self.optimizers, {"run": run})


def _supervised_update(h: _Harness, stream, opt, names, rec, lr):
    cfg, model = h.cfg, h.model
    image, flow3, mask = to_tensors(stream.next(), model.config.flow_scale)
    model.zero_grad(set_to_none=True)
    y, y_flow, _ = model(image, flow3)
    l_s, l_main, l_flow = supervised_terms(mask, y, y_flow if cfg.flow_supervision else None, cfg.weights)
    l_s.backward()
    opt.step(lr, names, step=h.global_step)
    rec.l_s = l_s.item()
    rec.l_msk_main = l_main.item()
    rec.l_msk_flow = l_flow.item() if l_flow is not None else 0.0
    return image, flow3


def _steps(cfg, n_samples, per_step_batches=1):
    if cfg.steps_per_epoch is not None:
        return cfg.steps_per_epoch
    return max(1, math.ceil(n_samples / (cfg.batch_size * per_step_batches)))


def _supervised_names(model, cfg):
    prefixes = {"en_s", "fuse", "de"}
    if cfg.flow_supervision:
        prefixes.add("de_flow")
    return _named(model, prefixes)


def train_supervised(cfg: TrainConfig, source, val=None, out_dir=None, resume=None, hook=None):
    """End-to-end training of encoder, fusion and decoders on labelled source data.

    ``val`` is an optional labelled dataset scored after every epoch.
    Returns ``(model, history)``.
    """
    src_rng, _ = _setup(cfg)
    model = SegmentationNet(cfg.model)
    sup = _supervised_names(model, cfg)
    opt = SGD(sup.items(), cfg.momentum, cfg.weight_decay)
    streams = {"source": _stream(source, cfg, src_rng)}
    h = _Harness(cfg, model, streams, {"sup": opt}, cfg.epochs, cfg.lr, _steps(cfg, len(source)),
                 out_dir, {"source": (val, "s")} if val is not None else None, hook)
    if resume is not None:
        h.resume(resume)

    def step(rec, lr, lam):
        _supervised_update(h, streams["source"], opt, None, rec, lr)
        h.notify("supervised")

    return h.run(step)


def train_uda_shared(cfg: TrainConfig, source, target, val_source=None, val_target=None,
                     out_dir=None, resume=None, hook=None):
    """Joint supervised training and adversarial alignment with one shared encoder.

    Each step: (1) supervised update on a source batch; (2) confusion update of
    the encoder and fusion layer on a target batch, weighted by the epoch's
    lambda1 (skipped while lambda1 is 0); (3) discriminator update on the
    source batch's features, recomputed without gradient, and fresh target
    features. Target labels are never read.
    """
    src_rng, tgt_rng = _setup(cfg)
    model = SegmentationNet(cfg.model)
    if cfg.warm_start:
        warm = load_checkpoint(cfg.warm_start, cfg).model
        model.load_state_dict(warm.state_dict(), strict=False)
    sup = _supervised_names(model, cfg)
    enc_names = list(_named(model, {"en_s", "fuse"}))
    opt = SGD(sup.items(), cfg.momentum, cfg.weight_decay)
    d_opt = SGD(_named(model, {"disc"}).items(), cfg.disc_momentum, cfg.weight_decay)
    target = unlabeled_view(target)
    streams = {"source": _stream(source, cfg, src_rng), "target": _stream(target, cfg, tgt_rng)}
    val = {}
    if val_source is not None:
        val["source"] = (val_source, "s")
    if val_target is not None:
        val["target"] = (val_target, "s")
    h = _Harness(cfg, model, streams, {"sup": opt, "disc": d_opt}, cfg.epochs, cfg.lr,
                 _steps(cfg, len(target)), out_dir, val, hook)
    if resume is not None:
        h.resume(resume)
    w, eps = cfg.weights, cfg.weights.eps
    scale = model.config.flow_scale

    def step(rec, lr, lam):
        src_image, src_flow = _supervised_update(h, streams["source"], opt, None, rec, lr)
        h.notify("supervised")

        tgt_image, tgt_flow, _ = to_tensors(streams["target"].next(), scale, with_mask=False)
        model.zero_grad(set_to_none=True)
        d_t = model.discriminate(model.features(tgt_image, tgt_flow))
        l_ent = confusion_loss(d_t, eps)
        if lam > 0:
            (lam * l_ent).backward()
            opt.step(lr, enc_names, step=h.global_step)
        rec.l_ent = l_ent.item()
        h.notify("encoder")

        model.zero_grad(set_to_none=True)
        with torch.no_grad():
            x_s = model.features(src_image, src_flow)
            x_t = model.features(tgt_image, tgt_flow)
        d_s, d_t = model.discriminate(x_s), model.discriminate(x_t)
        l_d = discriminator_loss(d_s, d_t, eps)
        (w.lambda2 * l_d).backward()
        d_opt.step(lr, step=h.global_step)
        rec.l_d = l_d.item()
        rec.disc_acc = _disc_accuracy(d_s.detach(), d_t.detach())
        h.notify("discriminator")

    return h.run(step)


def _freeze(module):
    if module is not None:
        for p in module.parameters():
            p.requires_grad_(False)


def train_uda_separated(cfg: TrainConfig, source_ckpt, source, target, val_target=None,
                        out_dir=None, resume=None, hook=None):
    """Adversarial adaptation of a cloned target encoder against a frozen source model.

    ``source_ckpt`` is a checkpoint path or a trained :class:`SegmentationNet`
    (copied, never modified). The source encoder, fusion layer and decoders stay
    frozen; each step runs ``n_iters`` discriminator updates followed by
    ``m_iters`` target-encoder updates. Source and target labels are never read.
    """
    src_rng, tgt_rng = _setup(cfg)
    if isinstance(source_ckpt, SegmentationNet):
        model = copy.deepcopy(source_ckpt)
    else:
        model = load_checkpoint(source_ckpt, cfg).model
    model.init_target_encoder()
    for name in ("en_s", "fuse", "de", "de_flow"):
        _freeze(getattr(model, name))
    enc_opt = SGD(_named(model, {"en_t"}).items(), cfg.uda_momentum, cfg.weight_decay)
    d_opt = SGD(_named(model, {"disc"}).items(), cfg.uda_momentum, cfg.weight_decay)
    streams = {
        "source": _stream(unlabeled_view(source), cfg, src_rng),
        "target": _stream(unlabeled_view(target), cfg, tgt_rng),
    }
    val = {"target": (val_target, "t")} if val_target is not None else None
    h = _Harness(cfg, model, streams, {"en_t": enc_opt, "disc": d_opt}, cfg.uda_epochs, cfg.uda_lr,
                 _steps(cfg, len(target), cfg.m_iters), out_dir, val, hook)
    if resume is not None:
        h.resume(resume)
    w, eps = cfg.weights, cfg.weights.eps
    scale = model.config.flow_scale

    def batch(key):
        image, flow3, _ = to_tensors(streams[key].next(), scale, with_mask=False)
        return image, flow3

    def step(rec, lr, lam):
        l_ds, accs = [], []
        for _ in range(cfg.n_iters):
            with torch.no_grad():
                x_s = model.features(*batch("source"), which="s")
                x_t = model.features(*batch("target"), which="t")
            model.zero_grad(set_to_none=True)
            d_s, d_t = model.discriminate(x_s), model.discriminate(x_t)
            l_d = discriminator_loss(d_s, d_t, eps)
            (w.beta2 * l_d).backward()
            d_opt.step(lr, step=h.global_step)
            l_ds.append(l_d.item())
            accs.append(_disc_accuracy(d_s.detach(), d_t.detach()))
        h.notify("discriminator")
        l_ents = []
        for _ in range(cfg.m_iters):
            model.zero_grad(set_to_none=True)
            l_ent = confusion_loss(model.discriminate(model.features(*batch("target"), which="t")), eps)
            (w.beta1 * l_ent).backward()
            enc_opt.step(lr, step=h.global_step)
            l_ents.append(l_ent.item())
        h.notify("encoder")
        rec.l_d = float(np.mean(l_ds))
        rec.l_ent = float(np.mean(l_ents))
        rec.disc_acc = float(np.mean(accs))

    return h.run(step)


@torch.no_grad()
def discriminator_accuracy(model: SegmentationNet, source, target, which_target: str = "s",
                           batch_size: int = 16) -> float:
    """Held-out domain classification accuracy of ``model.disc`` (labels: source 1, target 0)."""
    scale = model.config.flow_scale
    d_s, d_t = [], []
    for samples, which, out in ((source, "s", d_s), (unlabeled_view(target), which_target, d_t)):
        items = [samples[i] for i in range(len(samples))]
        for k in range(0, len(items), batch_size):
            image, flow3, _ = to_tensors(items[k:k + batch_size], scale, with_mask=False)
            image, flow3 = pad_to_multiple(image, model.stride), pad_to_multiple(flow3, model.stride)
            out.append(model.discriminate(model.features(image, flow3, which)))
    return _disc_accuracy(torch.cat(d_s), torch.cat(d_t))


def train(cfg: TrainConfig, source=None, target=None, source_ckpt=None, **kw):
    """Dispatch on ``cfg.regime``."""
    if cfg.regime is Regime.SUPERVISED:
        return train_supervised(cfg, source, **kw)
    if cfg.regime is Regime.UDA_SHARED:
        return train_uda_shared(cfg, source, target, **kw)
    return train_uda_separated(cfg, source_ckpt, source, target, **kw)
