"""Flow inspection helpers: summary statistics, colour-wheel rendering, resize and crop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ShapeError

# Hue segment lengths of the Middlebury colour wheel (red-yellow-green-cyan-blue-magenta).
_SEGMENTS = (("RY", 15), ("YG", 6), ("GC", 4), ("CB", 11), ("BM", 13), ("MR", 6))


@dataclass(frozen=True)
class FlowStats:
    height: int
    width: int
    max_magnitude: float
    mean_magnitude: float
    u_range: tuple[float, float]
    v_range: tuple[float, float]

    def summary(self) -> str:
        return (f"{self.height}×{self.width}, max |v| = {self.max_magnitude:g}\n"
                f"mean |v| = {self.mean_magnitude:g}, "
                f"u in [{self.u_range[0]:g}, {self.u_range[1]:g}], "
                f"v in [{self.v_range[0]:g}, {self.v_range[1]:g}]")


def flow_stats(flow: np.ndarray) -> FlowStats:
    mag = np.hypot(flow[..., 0].astype(np.float64), flow[..., 1].astype(np.float64))
    u, v = flow[..., 0], flow[..., 1]
    return FlowStats(flow.shape[0], flow.shape[1], float(mag.max()), float(mag.mean()),
                     (float(u.min()), float(u.max())), (float(v.min()), float(v.max())))


def color_wheel() -> np.ndarray:
    """``(55, 3)`` RGB hues in [0, 255], one per wheel position."""
    cols = []
    for name, n in _SEGMENTS:
        ramp = np.floor(255 * np.arange(n) / n)
        seg = np.zeros((n, 3))
        if name == "RY":
            seg[:, 0], seg[:, 1] = 255, ramp
        elif name == "YG":
            seg[:, 0], seg[:, 1] = 255 - ramp, 255
        elif name == "GC":
            seg[:, 1], seg[:, 2] = 255, ramp
        elif name == "CB":
            seg[:, 1], seg[:, 2] = 255 - ramp, 255
        elif name == "BM":
            seg[:, 2], seg[:, 0] = 255, ramp
        else:
            seg[:, 2], seg[:, 0] = 255 - ramp, 255
        cols.append(seg)
    return np.concatenate(cols)


def flow_to_color(flow: np.ndarray, max_magnitude: float | None = None) -> np.ndarray:
    """Render a flow field as uint8 RGB: hue encodes direction, saturation magnitude.

    Zero flow maps to white. ``max_magnitude`` fixes the normaliser (default: the
    field's own maximum).
    """
    u = flow[..., 0].astype(np.float64)
    v = flow[..., 1].astype(np.float64)
    mag = np.hypot(u, v)
    scale = max_magnitude if max_magnitude is not None else mag.max()
    if scale > 0:
        u, v, mag = u / scale, v / scale, mag / scale
    wheel = color_wheel()
    n = len(wheel)
    angle = np.arctan2(-v, -u) / np.pi
    k = (angle + 1) / 2 * (n - 1)
    k0 = np.floor(k).astype(int)
    k1 = (k0 + 1) % n
    frac = (k - k0)[..., None]
    col = ((1 - frac) * wheel[k0] + frac * wheel[k1]) / 255
    m = np.clip(mag, 0, 1)[..., None]
    col = 1 - m * (1 - col)
    col[mag > 1] *= 0.75
    return np.floor(255 * col).astype(np.uint8)


def resize_flow(flow: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resample; vectors are rescaled so they stay in pixels of the new grid."""
    if height < 1 or width < 1:
        raise ShapeError(f"target size must be positive, got {height}x{width}")
    h, w = flow.shape[:2]
    t = torch.from_numpy(np.ascontiguousarray(flow.transpose(2, 0, 1), dtype=np.float32))[None]
    out = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False)[0].numpy()
    out[0] *= width / w
    out[1] *= height / h
    return np.ascontiguousarray(out.transpose(1, 2, 0))


def crop_flow(flow: np.ndarray, top: int, left: int, height: int, width: int) -> np.ndarray:
    h, w = flow.shape[:2]
    if top < 0 or left < 0 or top + height > h or left + width > w or height < 1 or width < 1:
        raise ShapeError(f"crop ({top},{left},{height},{width}) outside {h}x{w} field")
    return np.ascontiguousarray(flow[top:top + height, left:left + width])
