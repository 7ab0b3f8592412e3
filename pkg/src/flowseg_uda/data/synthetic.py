"""Moving-shape video sequences with exact masks and exact optical flow.

Each sequence is rendered analytically: objects are rigid textured shapes whose
pixels are sampled through the inverse motion, so the flow of every moving
pixel is known in closed form. Static distractors are drawn from the same
appearance style as the moving objects and carry zero flow and zero mask.

Flow convention: the flow stored with frame ``t`` lives on frame ``t``'s pixel
grid and holds, for each pixel ``p``, the displacement ``p - q`` where ``q`` is
the position of the same material point in frame ``t-1``. For translating
objects this is the per-frame velocity.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import SpecInvalid
from .sample import Domain, FrameSample

SHAPES = ("square", "disc", "triangle", "diamond", "ellipse", "bar")


@dataclass(frozen=True)
class AppearanceStyle:
    """Palette and texture statistics that define a visual domain."""

    name: str
    object_palette: tuple[tuple[float, float, float], ...]
    background_base: tuple[float, float, float]
    background_amplitude: float = 0.1
    background_frequency: tuple[float, float] = (0.05, 0.15)
    object_texture_amplitude: float = 0.1
    object_texture_frequency: tuple[float, float] = (0.2, 0.4)
    color_noise: float = 0.05
    shapes: tuple[str, ...] = ("square", "disc")


SOURCE_STYLE = AppearanceStyle(
    name="source",
    object_palette=((0.9, 0.3, 0.2), (0.95, 0.6, 0.2), (0.9, 0.85, 0.3), (0.8, 0.3, 0.5)),
    background_base=(0.2, 0.25, 0.4),
    background_amplitude=0.08,
    background_frequency=(0.04, 0.12),
    object_texture_amplitude=0.08,
    object_texture_frequency=(0.2, 0.4),
    shapes=("square", "disc"),
)

TARGET_STYLE = AppearanceStyle(
    name="target",
    object_palette=((0.2, 0.8, 0.5), (0.3, 0.7, 0.9), (0.6, 0.4, 0.9), (0.3, 0.9, 0.8)),
    background_base=(0.55, 0.5, 0.35),
    background_amplitude=0.2,
    background_frequency=(0.15, 0.35),
    object_texture_amplitude=0.15,
    object_texture_frequency=(0.3, 0.6),
    shapes=("triangle", "ellipse", "diamond"),
)

STYLES = {s.name: s for s in (SOURCE_STYLE, TARGET_STYLE)}


@dataclass(frozen=True)
class Motion:
    velocity: tuple[float, float]  # (u, v) in pixels/frame
    rotation: float = 0.0  # radians/frame


@dataclass(frozen=True)
class SyntheticSpec:
    height: int = 64
    width: int = 64
    n_moving_objects: int = 1
    n_static_distractors: int = 0
    length: int = 8
    seed: int = 0
    style: AppearanceStyle = SOURCE_STYLE
    object_size: tuple[float, float] = (6.0, 10.0)  # half-extent range, pixels
    speed: tuple[float, float] = (1.0, 3.0)
    max_rotation: float = 0.0
    motions: tuple[Motion, ...] | None = None
    domain: Domain = Domain.SOURCE

    def validate(self) -> None:
        if self.height < 1 or self.width < 1:
            raise SpecInvalid(f"canvas must be positive, got {self.height}x{self.width}")
        if self.n_moving_objects < 1:
            raise SpecInvalid("n_moving_objects must be >= 1")
        if self.n_static_distractors < 0:
            raise SpecInvalid("n_static_distractors must be >= 0")
        if self.length < 2:
            raise SpecInvalid("sequence length must be >= 2")
        lo, hi = self.object_size
        if not 0 < lo <= hi:
            raise SpecInvalid(f"object_size range invalid: {self.object_size}")
        if 2 * _bounding_radius(hi) >= min(self.height, self.width):
            raise SpecInvalid(
                f"objects of half-size {hi} do not fit a {self.height}x{self.width} canvas"
            )
        if self.motions is not None and len(self.motions) != self.n_moving_objects:
            raise SpecInvalid("motions must list one entry per moving object")
        unknown = set(self.style.shapes) - set(SHAPES)
        if unknown:
            raise SpecInvalid(f"unknown shapes {sorted(unknown)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domain"] = self.domain.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SyntheticSpec:
        d = dict(d)
        style = d.pop("style", SOURCE_STYLE)
        if isinstance(style, str):
            if style not in STYLES:
                raise SpecInvalid(f"unknown style {style!r}")
            style = STYLES[style]
        elif isinstance(style, dict):
            style = AppearanceStyle(**{
                k: tuple(tuple(c) for c in v) if k == "object_palette" else (tuple(v) if isinstance(v, list) else v)
                for k, v in style.items()
            })
        motions = d.pop("motions", None)
        if motions is not None:
            motions = tuple(
                m if isinstance(m, Motion) else Motion(tuple(m["velocity"]), m.get("rotation", 0.0))
                for m in motions
            )
        for key in ("object_size", "speed"):
            if key in d:
                d[key] = tuple(d[key])
        if "domain" in d:
            d["domain"] = Domain(d["domain"])
        try:
            return cls(style=style, motions=motions, **d)
        except TypeError as exc:
            raise SpecInvalid(str(exc)) from exc


@dataclass
class _Shape:
    kind: str
    size: float
    color: np.ndarray
    tex_freq: np.ndarray
    tex_phase: float
    tex_gain: np.ndarray
    center0: np.ndarray
    angle0: float
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    rotation: float = 0.0

    def center(self, t: int, height: int, width: int) -> np.ndarray:
        r = _bounding_radius(self.size)
        x = _bounce(self.center0[0] + self.velocity[0] * t, r, width - 1 - r)
        y = _bounce(self.center0[1] + self.velocity[1] * t, r, height - 1 - r)
        return np.array([x, y])

    def angle(self, t: int) -> float:
        return self.angle0 + self.rotation * t

    @property
    def moving(self) -> bool:
        return bool(np.any(self.velocity != 0) or self.rotation != 0)


@dataclass
class SyntheticSequence:
    """Raw rendering: every frame including the flow anchor at index 0."""

    images: list[np.ndarray]
    masks: list[np.ndarray]
    flows: list[np.ndarray]  # flows[0] is all zeros and is never used as a sample
    distractor_masks: list[np.ndarray]  # visible static-distractor pixels, HxW bool


def _bounding_radius(half_size: float) -> float:
    return half_size * math.sqrt(2.0)


def _bounce(x: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    u = (x - lo) % (2 * span)
    return lo + (u if u <= span else 2 * span - u)


def _inside(kind: str, lx: np.ndarray, ly: np.ndarray, s: float) -> np.ndarray:
    if kind == "square":
        return np.maximum(np.abs(lx), np.abs(ly)) <= s
    if kind == "disc":
        return lx * lx + ly * ly <= s * s
    if kind == "diamond":
        return np.abs(lx) + np.abs(ly) <= s
    if kind == "ellipse":
        return (lx / s) ** 2 + (ly / (0.55 * s)) ** 2 <= 1.0
    if kind == "bar":
        return (np.abs(lx) <= s) & (np.abs(ly) <= 0.4 * s)
    if kind == "triangle":
        inside = np.ones_like(lx, dtype=bool)
        for deg in (-90.0, 30.0, 150.0):
            a = math.radians(deg)
            inside &= lx * math.cos(a) + ly * math.sin(a) <= 0.5 * s
        return inside
    raise SpecInvalid(f"unknown shape {kind!r}")


def _draw_shape(rng: np.random.Generator, spec: SyntheticSpec) -> _Shape:
    style = spec.style
    kind = style.shapes[rng.integers(len(style.shapes))]
    size = rng.uniform(*spec.object_size)
    base = np.array(style.object_palette[rng.integers(len(style.object_palette))])
    color = np.clip(base + rng.normal(0.0, style.color_noise, 3), 0.0, 1.0)
    f = rng.uniform(*style.object_texture_frequency)
    theta = rng.uniform(0, 2 * np.pi)
    r = _bounding_radius(size)
    center0 = np.array([
        rng.uniform(r, spec.width - 1 - r),
        rng.uniform(r, spec.height - 1 - r),
    ])
    return _Shape(
        kind=kind,
        size=size,
        color=color,
        tex_freq=f * np.array([math.cos(theta), math.sin(theta)]),
        tex_phase=rng.uniform(0, 2 * np.pi),
        tex_gain=rng.uniform(0.5, 1.0, 3),
        center0=center0,
        angle0=rng.uniform(0, 2 * np.pi),
    )


def _background(rng: np.random.Generator, spec: SyntheticSpec, xs, ys) -> np.ndarray:
    style = spec.style
    img = np.empty((spec.height, spec.width, 3))
    img[:] = np.asarray(style.background_base)
    n_waves = 3
    for _ in range(n_waves):
        f = rng.uniform(*style.background_frequency)
        theta = rng.uniform(0, 2 * np.pi)
        phase = rng.uniform(0, 2 * np.pi, 3)
        wave = f * (xs * math.cos(theta) + ys * math.sin(theta))
        img += (style.background_amplitude / n_waves * 2) * np.sin(wave[..., None] + phase)
    return img


def _render_shape(shape: _Shape, t: int, spec: SyntheticSpec, xs, ys):
    """Return (support, colors, local coordinates) for ``shape`` at frame ``t``."""
    c = shape.center(t, spec.height, spec.width)
    a = shape.angle(t)
    dx, dy = xs - c[0], ys - c[1]
    ca, sa = math.cos(a), math.sin(a)
    lx = ca * dx + sa * dy
    ly = -sa * dx + ca * dy
    support = _inside(shape.kind, lx, ly, shape.size)
    tex = np.sin(shape.tex_freq[0] * lx + shape.tex_freq[1] * ly + shape.tex_phase)
    amp = spec.style.object_texture_amplitude
    colors = shape.color + amp * tex[..., None] * shape.tex_gain
    return support, colors, (lx, ly)


def _shape_flow(shape: _Shape, t: int, spec: SyntheticSpec, lx, ly) -> np.ndarray:
    c_now = shape.center(t, spec.height, spec.width)
    c_prev = shape.center(t - 1, spec.height, spec.width)
    a_now, a_prev = shape.angle(t), shape.angle(t - 1)
    ca, sa = math.cos(a_now), math.sin(a_now)
    px = c_now[0] + ca * lx - sa * ly
    py = c_now[1] + sa * lx + ca * ly
    cb, sb = math.cos(a_prev), math.sin(a_prev)
    qx = c_prev[0] + cb * lx - sb * ly
    qy = c_prev[1] + sb * lx + cb * ly
    return np.stack([px - qx, py - qy], axis=-1)


def render_sequence(spec: SyntheticSpec) -> SyntheticSequence:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    background = _background(rng, spec, xs, ys)

    movers = []
    for k in range(spec.n_moving_objects):
        shape = _draw_shape(rng, spec)
        if spec.motions is not None:
            shape.velocity = np.asarray(spec.motions[k].velocity, dtype=np.float64)
            shape.rotation = float(spec.motions[k].rotation)
        else:
            speed = rng.uniform(*spec.speed)
            heading = rng.uniform(0, 2 * np.pi)
            shape.velocity = speed * np.array([math.cos(heading), math.sin(heading)])
            shape.rotation = rng.uniform(-spec.max_rotation, spec.max_rotation) if spec.max_rotation else 0.0
        movers.append(shape)
    distractors = [_draw_shape(rng, spec) for _ in range(spec.n_static_distractors)]

    # Distractors sit under movers, so the visible moving support is exactly the mask.
    static = background.copy()
    static_support = np.zeros((spec.height, spec.width), dtype=bool)
    for shape in distractors:
        support, colors, _ = _render_shape(shape, 0, spec, xs, ys)
        static[support] = colors[support]
        static_support |= support

    images, masks, flows, hidden = [], [], [], []
    for t in range(spec.length):
        img = static.copy()
        mask = np.zeros((spec.height, spec.width), dtype=bool)
        flow = np.zeros((spec.height, spec.width, 2))
        for shape in movers:
            support, colors, (lx, ly) = _render_shape(shape, t, spec, xs, ys)
            img[support] = colors[support]
            if shape.moving:
                mask |= support
                if t > 0:
                    flow[support] = _shape_flow(shape, t, spec, lx, ly)[support]
            else:
                mask &= ~support
                flow[support] = 0.0
        covered = np.zeros_like(mask)
        for shape in movers:
            covered |= _render_shape(shape, t, spec, xs, ys)[0]
        hidden.append(static_support & ~covered)
        images.append(np.clip(img, 0.0, 1.0).astype(np.float32))
        masks.append(mask.astype(np.float32)[..., None])
        flows.append(flow.astype(np.float32))
    return SyntheticSequence(images, masks, flows, hidden)


def generate_synthetic_sequence(spec: SyntheticSpec, sequence_id: str = "seq000") -> list[FrameSample]:
    """Render ``spec`` and return samples for frames ``1 .. length-1``."""
    seq = render_sequence(spec)
    return [
        FrameSample(seq.images[t], seq.flows[t], seq.masks[t], sequence_id, t, spec.domain)
        for t in range(1, spec.length)
    ]


def sequence_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1)[0]) for c in children]


def generate_synthetic_dataset(
    spec: SyntheticSpec, n_sequences: int, prefix: str = "seq"
) -> dict[str, list[FrameSample]]:
    """``n_sequences`` independent sequences keyed by id, seeds derived from ``spec.seed``."""
    from dataclasses import replace

    out = {}
    for i, s in enumerate(sequence_seeds(spec.seed, n_sequences)):
        out[f"{prefix}{i:03d}"] = generate_synthetic_sequence(replace(spec, seed=s), f"{prefix}{i:03d}")
    return out


def flatten(sequences: dict[str, list[FrameSample]]) -> list[FrameSample]:
    return [s for seq in sequences.values() for s in seq]
