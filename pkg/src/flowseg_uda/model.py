"""Two-stream segmentation network, fusion layer, decoders and domain discriminator.

Tensors are NCHW. Branch encoders are plain strided-convolution stacks so that
a pretrained backbone can be dropped in behind the same ``(N,3,H,W) -> (N,C,H/s,W/s)``
interface.
"""
from __future__ import annotations

import copy
import enum
import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError


class FusionMode(str, enum.Enum):
    CONV = "conv"
    PRODUCT = "product"
    ADDITION = "addition"


@dataclass(frozen=True)
class ModelConfig:
    widths: tuple[int, ...] = (16, 32, 64, 96)
    fusion: FusionMode = FusionMode.CONV
    flow_branch: bool = True
    disc_widths: tuple[int, int, int] = (32, 32, 32)
    flow_scale: float = 384 / 20
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fusion", FusionMode(self.fusion))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "disc_widths", tuple(int(w) for w in self.disc_widths))
        if len(self.disc_widths) != 3:
            raise ValueError("discriminator has exactly three strided convolutions")

    @property
    def stride(self) -> int:
        return 2 ** len(self.widths)

    def fingerprint(self) -> str:
        """Hash of everything that determines parameter names and shapes."""
        arch = {
            "widths": list(self.widths),
            "fusion": self.fusion.value if self.flow_branch else None,
            "flow_branch": self.flow_branch,
            "disc_widths": list(self.disc_widths),
        }
        return hashlib.sha256(json.dumps(arch, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fusion"] = self.fusion.value
        d["widths"] = list(self.widths)
        d["disc_widths"] = list(self.disc_widths)
        return d


class ConvStage(nn.Module):
    def __init__(self, c_in, c_out, stride=1):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)

    def forward(self, x):
        return F.relu(self.conv(x))


class BranchEncoder(nn.Module):
    """Strided 3x3 convolutions; each stage halves the resolution."""

    def __init__(self, widths, c_in=3):
        super().__init__()
        self.n_stages = len(widths)
        for i, w in enumerate(widths, start=1):
            setattr(self, f"stage{i}", ConvStage(c_in, w, stride=2))
            c_in = w
        self.out_channels = c_in

    def forward(self, x):
        for i in range(1, self.n_stages + 1):
            x = getattr(self, f"stage{i}")(x)
        return x


class TwoStreamEncoder(nn.Module):
    def __init__(self, widths, flow_branch=True):
        super().__init__()
        self.stride = 2 ** len(widths)
        self.app = BranchEncoder(widths)
        self.flow = BranchEncoder(widths) if flow_branch else None

    def forward(self, image, flow3):
        h, w = image.shape[-2:]
        if h % self.stride or w % self.stride:
            raise ShapeError(f"input {h}x{w} not divisible by encoder stride {self.stride}")
        if flow3 is not None and flow3.shape[-2:] != image.shape[-2:]:
            raise ShapeError(f"flow {tuple(flow3.shape[-2:])} vs image {(h, w)}")
        x_app = self.app(image)
        x_flow = self.flow(flow3) if self.flow is not None else None
        return x_app, x_flow


class Fusion(nn.Module):
    """Merge appearance and motion features by convolution, product or sum."""

    def __init__(self, mode: FusionMode, c_app: int, c_flow: int, c_out: int | None = None):
        super().__init__()
        self.mode = FusionMode(mode)
        self.out_channels = c_out or c_app
        if self.mode is FusionMode.CONV:
            self.conv = nn.Conv2d(c_app + c_flow, self.out_channels, 3, padding=1)
        elif c_app != c_flow:
            raise ShapeError(f"{self.mode.value} fusion needs equal channels, got {c_app} and {c_flow}")

    def forward(self, x_app, x_flow):
        if x_app.shape[-2:] != x_flow.shape[-2:]:
            raise ShapeError(f"feature maps differ in size: {tuple(x_app.shape)} vs {tuple(x_flow.shape)}")
        if self.mode is FusionMode.CONV:
            return self.conv(torch.cat([x_app, x_flow], dim=1))
        if x_app.shape != x_flow.shape:
            raise ShapeError(f"{self.mode.value} fusion shape mismatch {tuple(x_app.shape)} vs {tuple(x_flow.shape)}")
        if self.mode is FusionMode.PRODUCT:
            return x_app * x_flow
        return x_app + x_flow


class Decoder(nn.Module):
    """(3x3 conv, ReLU, 2x bilinear upsample) per stage, then 1x1 conv and sigmoid.

    No skip connections: the only input is the bottleneck feature map.
    """

    def __init__(self, c_in, widths):
        super().__init__()
        self.n_stages = len(widths)
        for i, w in enumerate(widths, start=1):
            setattr(self, f"stage{i}", ConvStage(c_in, w))
            c_in = w
        self.head = nn.Conv2d(c_in, 1, 1)

    def logits(self, x):
        for i in range(1, self.n_stages + 1):
            x = getattr(self, f"stage{i}")(x)
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        return self.head(x)

    def forward(self, x):
        return torch.sigmoid(self.logits(x))


class Discriminator(nn.Module):
    """Three stride-2 convolutions, global average pooling, 1x1 conv, sigmoid.

    Returns one probability per sample; 1 means "source".
    """

    def __init__(self, c_in, widths=(32, 32, 32)):
        super().__init__()
        for i, w in enumerate(widths, start=1):
            setattr(self, f"conv{i}", nn.Conv2d(c_in, w, 3, stride=2, padding=1))
            c_in = w
        self.head = nn.Conv2d(c_in, 1, 1)

    def forward(self, x):
        for i in (1, 2, 3):
            x = F.relu(getattr(self, f"conv{i}")(x))
        x = x.mean(dim=(2, 3), keepdim=True)
        return torch.sigmoid(self.head(x)).flatten()


def init_target_encoder(source: TwoStreamEncoder) -> TwoStreamEncoder:
    """Independent copy of the source encoder, value-equal at creation."""
    return copy.deepcopy(source)


class SegmentationNet(nn.Module):
    """All trainable modules: ``en_s``, ``en_t``, ``fuse``, ``de``, ``de_flow``, ``disc``.

    ``en_t`` is absent until :meth:`init_target_encoder` is called.
    ``fuse`` and ``de_flow`` are absent in the appearance-only baseline.
    """

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config = config or ModelConfig()
        widths = config.widths
        self.en_s = TwoStreamEncoder(widths, config.flow_branch)
        self.en_t = None
        c = widths[-1]
        if config.flow_branch:
            self.fuse = Fusion(config.fusion, c, c, c)
            self.de_flow = Decoder(c, widths[::-1])
        else:
            self.fuse = None
            self.de_flow = None
        self.de = Decoder(c, widths[::-1])
        self.disc = Discriminator(c, config.disc_widths)
        reset_parameters(self, config.init_seed)

    @property
    def stride(self) -> int:
        return self.config.stride

    def init_target_encoder(self) -> TwoStreamEncoder:
        self.en_t = init_target_encoder(self.en_s)
        return self.en_t

    def encoder(self, which: str = "s") -> TwoStreamEncoder:
        enc = self.en_s if which == "s" else self.en_t
        if enc is None:
            raise RuntimeError("target encoder not initialised")
        return enc

    def encode(self, image, flow3, which: str = "s"):
        return self.encoder(which)(image, flow3)

    def fuse_features(self, x_app, x_flow):
        if self.fuse is None:
            return x_app
        return self.fuse(x_app, x_flow)

    def features(self, image, flow3, which: str = "s"):
        """Fused feature map X (the quantity the discriminator sees)."""
        x_app, x_flow = self.encode(image, flow3, which)
        return self.fuse_features(x_app, x_flow)

    def decode(self, x):
        return self.de(x)

    def decode_flow(self, x_flow):
        if self.de_flow is None:
            raise RuntimeError("model has no flow branch")
        return self.de_flow(x_flow)

    def discriminate(self, x):
        return self.disc(x)

    def forward(self, image, flow3, which: str = "s"):
        """Return ``(main_probs, flow_probs or None, fused_features)``."""
        x_app, x_flow = self.encode(image, flow3, which)
        x = self.fuse_features(x_app, x_flow)
        y = self.de(x)
        y_flow = self.de_flow(x_flow) if self.de_flow is not None else None
        return y, y_flow, x

    def segment(self, image, flow3, which: str = "s"):
        """Mask probabilities at any input size.

        Inputs are padded at the bottom/right to the next multiple of the stride
        (reflect when possible, replicate otherwise) and the output is cropped back.
        """
        h, w = image.shape[-2:]
        image_p = pad_to_multiple(image, self.stride)
        flow_p = pad_to_multiple(flow3, self.stride) if flow3 is not None else None
        x = self.features(image_p, flow_p, which)
        return self.de(x)[..., :h, :w]


def pad_to_multiple(x, stride):
    h, w = x.shape[-2:]
    ph, pw = (-h) % stride, (-w) % stride
    if not ph and not pw:
        return x
    mode = "reflect" if ph < h and pw < w else "replicate"
    return F.pad(x, (0, pw, 0, ph), mode=mode)


def reset_parameters(module: nn.Module, seed: int) -> None:
    """Seeded fan-in scaled init for every convolution; zero biases."""
    gen = torch.Generator().manual_seed(int(seed))
    for _, m in module.named_modules():
        if isinstance(m, nn.Conv2d):
            with torch.no_grad():
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu", generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


def canonical_name(torch_name: str) -> str:
    head, _, leaf = torch_name.rpartition(".")
    leaf = {"weight": "w", "bias": "b"}.get(leaf, leaf)
    return f"{head}.{leaf}" if head else leaf


def canonical_parameters(model: nn.Module) -> dict[str, torch.Tensor]:
    return {canonical_name(n): p for n, p in model.named_parameters()}


def parameter_groups(model: SegmentationNet) -> dict[str, list[tuple[str, nn.Parameter]]]:
    """Parameters grouped by module prefix (``en_s.app``, ``fuse``, ``disc`` ...)."""
    groups: dict[str, list] = {}
    for name, p in canonical_parameters(model).items():
        parts = name.split(".")
        key = ".".join(parts[:2]) if parts[0] in ("en_s", "en_t") else parts[0]
        groups.setdefault(key, []).append((name, p))
    return groups


def checksum(module: nn.Module | None) -> str:
    """Byte-level digest of a module's parameters (order-stable)."""
    h = hashlib.sha256()
    if module is not None:
        for name, p in module.named_parameters():
            h.update(name.encode())
            h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def to_tensors(samples, flow_scale: float, with_mask: bool = True, dtype=torch.float32):
    """Stack FrameSamples into NCHW tensors ``(image, flow3, mask or None)``.

    Flow is divided by ``flow_scale`` and then gets a constant-ones third channel.
    """
    from .data.augment import pad_flow_channels

    images = np.stack([s.image for s in samples])
    flows = np.stack([pad_flow_channels(s.flow / np.float32(flow_scale)) for s in samples])
    image_t = torch.from_numpy(np.ascontiguousarray(images.transpose(0, 3, 1, 2))).to(dtype)
    flow_t = torch.from_numpy(np.ascontiguousarray(flows.transpose(0, 3, 1, 2))).to(dtype)
    mask_t = None
    if with_mask:
        masks = np.stack([s.mask for s in samples])
        mask_t = torch.from_numpy(np.ascontiguousarray(masks.transpose(0, 3, 1, 2))).to(dtype)
    return image_t, flow_t, mask_t
