"""Synthetic occlusion videos with exact visible/amodal ground truth.

Rigid shapes (circle / rectangle / triangle) move with constant velocity,
optionally bouncing off the frame walls. Each instance has a fixed depth,
so per-pixel occlusion is resolved unambiguously: the visible mask of an
instance is its amodal silhouette minus everything strictly closer to the
camera. Amodal masks are clipped to the frame and are forced empty on all
frames before the instance first becomes visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SHAPE_KINDS = ("circle", "rectangle", "triangle")

# flat RGB colors, pairwise well separated so appearance identifies instances
COLOR_PALETTE = (
    (230, 60, 60),
    (60, 190, 60),
    (70, 90, 235),
    (235, 210, 50),
    (60, 200, 210),
    (220, 90, 220),
    (245, 145, 40),
    (150, 230, 150),
)

BACKGROUND_INTENSITY = 20


@dataclass
class ShapeSpec:
    """One rigid instance: geometry, motion and identity attributes."""

    kind: str
    size: float
    initial_position: tuple[float, float]  # (x, y) center in pixels
    velocity: tuple[float, float]  # (dx, dy) pixels per frame
    depth: int  # smaller = closer to camera
    category: int

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.size <= 0:
            raise ValueError("shape size must be positive")


@dataclass
class SceneConfig:
    """Parameters for one generated video."""

    height: int = 64
    width: int = 64
    num_frames: int = 16
    num_instances_min: int = 2
    num_instances_max: int = 5
    num_categories: int = 3
    size_min: float = 5.0
    size_max: float = 11.0
    speed_max: float = 3.0
    bounce: bool = True
    noise_std: float = 4.0  # additive gaussian noise on 0..255 intensities
    spawn_margin: float = 0.25  # spawn box extends this fraction beyond frame

    def validate(self) -> None:
        if self.num_frames <= 0:
            raise ValueError("num_frames must be >= 1")
        if self.num_instances_min <= 0:
            raise ValueError("num_instances_min must be >= 1")
        if self.num_instances_min > self.num_instances_max:
            raise ValueError("num_instances_min > num_instances_max")
        if self.num_instances_max > len(COLOR_PALETTE):
            raise ValueError(
                f"at most {len(COLOR_PALETTE)} instances per scene supported"
            )
        if self.num_categories <= 0:
            raise ValueError("num_categories must be >= 1")
        if self.height <= 0 or self.width <= 0:
            raise ValueError("frame size must be positive")


@dataclass
class VideoSample:
    """A video plus per-instance ground-truth mask tubes.

    ``first_visible_frame[i] == num_frames`` means instance i is never
    visible; its amodal tube is empty on every frame.
    """

    frames: np.ndarray  # uint8, (num_frames, 3, H, W)
    visible_masks: np.ndarray  # bool, (N, num_frames, H, W)
    amodal_masks: np.ndarray  # bool, (N, num_frames, H, W)
    categories: np.ndarray  # int64, (N,)
    depths: np.ndarray  # int64, (N,)
    first_visible_frame: np.ndarray  # int64, (N,)
    shapes: list[ShapeSpec] = field(default_factory=list)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_instances(self) -> int:
        return self.visible_masks.shape[0]

    @property
    def frame_size(self) -> tuple[int, int]:
        return self.frames.shape[2], self.frames.shape[3]


def _rasterize_at(kind: str, size: float, center: tuple[float, float],
                  bounds: tuple[int, int]) -> np.ndarray:
    """Silhouette of a shape at a given center, on the pixel-center grid."""
    height, width = bounds
    cx, cy = center
    ys, xs = np.mgrid[0:height, 0:width]
    if kind == "circle":
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= size ** 2
    if kind == "rectangle":
        return (np.abs(xs - cx) <= size) & (np.abs(ys - cy) <= 0.6 * size)
    if kind == "triangle":
        # vertices: apex (cx, cy - size), base corners (cx +- size, cy + size)
        inside = ys - cy <= size
        inside &= (ys - cy) >= 2.0 * (xs - cx) - size
        inside &= (ys - cy) >= -2.0 * (xs - cx) - size
        return inside
    raise ValueError(f"unknown shape kind {kind!r}")


def rasterize_amodal(shape: ShapeSpec, t: int,
                     bounds: tuple[int, int]) -> np.ndarray:
    """Full silhouette of ``shape`` at frame ``t`` under constant velocity.

    Clipped to the frame; fully out-of-frame positions yield an empty mask.
    """
    if t < 0:
        raise ValueError("frame index must be >= 0")
    cx = shape.initial_position[0] + t * shape.velocity[0]
    cy = shape.initial_position[1] + t * shape.velocity[1]
    return _rasterize_at(shape.kind, shape.size, (cx, cy), bounds)


def shape_trajectory(shape: ShapeSpec, num_frames: int,
                     bounds: tuple[int, int], bounce: bool) -> np.ndarray:
    """Per-frame centers, (num_frames, 2) as (x, y).

    With ``bounce`` the velocity component flips when the shape's extent
    would leave the frame while moving outward; shapes spawned outside are
    unaffected until they travel inward past the wall.
    """
    height, width = bounds
    pos = np.array(shape.initial_position, dtype=np.float64)
    vel = np.array(shape.velocity, dtype=np.float64)
    limits = np.array([width - 1, height - 1], dtype=np.float64)
    out = np.empty((num_frames, 2), dtype=np.float64)
    for t in range(num_frames):
        out[t] = pos
        nxt = pos + vel
        if bounce:
            for axis in range(2):
                if nxt[axis] - shape.size < 0 and vel[axis] < 0:
                    vel[axis] = -vel[axis]
                elif nxt[axis] + shape.size > limits[axis] and vel[axis] > 0:
                    vel[axis] = -vel[axis]
        pos = pos + vel
    return out


def compose_visible(amodal_masks: np.ndarray,
                    depths: np.ndarray) -> np.ndarray:
    """Visible masks for one frame: amodal minus strictly closer occluders."""
    depths = np.asarray(depths)
    if len(np.unique(depths)) != len(depths):
        raise ValueError("depths must be unique within a scene")
    visible = np.empty_like(amodal_masks)
    for i in range(amodal_masks.shape[0]):
        occluded = np.zeros(amodal_masks.shape[1:], dtype=bool)
        for j in range(amodal_masks.shape[0]):
            if depths[j] < depths[i]:
                occluded |= amodal_masks[j]
        visible[i] = amodal_masks[i] & ~occluded
    return visible


def sample_shapes(config: SceneConfig, rng: np.random.Generator) -> list[ShapeSpec]:
    """Draw a random set of instances for one scene."""
    n = int(rng.integers(config.num_instances_min, config.num_instances_max + 1))
    kinds = SHAPE_KINDS[: min(len(SHAPE_KINDS), config.num_categories)]
    depths = rng.permutation(n)
    shapes = []
    for i in range(n):
        kind_idx = int(rng.integers(0, len(kinds)))
        size = float(rng.uniform(config.size_min, config.size_max))
        margin_x = config.spawn_margin * config.width
        margin_y = config.spawn_margin * config.height
        x = float(rng.uniform(-margin_x, config.width + margin_x))
        y = float(rng.uniform(-margin_y, config.height + margin_y))
        vx = float(rng.uniform(-config.speed_max, config.speed_max))
        vy = float(rng.uniform(-config.speed_max, config.speed_max))
        shapes.append(ShapeSpec(
            kind=kinds[kind_idx],
            size=size,
            initial_position=(x, y),
            velocity=(vx, vy),
            depth=int(depths[i]),
            category=kind_idx,
        ))
    return shapes


def render_frames(shapes: list[ShapeSpec], visible_masks: np.ndarray,
                  config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Paint flat-colored instances over a gray background, plus noise."""
    num_frames = visible_masks.shape[1]
    colors = np.array(COLOR_PALETTE, dtype=np.float64)
    color_order = rng.permutation(len(COLOR_PALETTE))[: len(shapes)]
    frames = np.full(
        (num_frames, 3, config.height, config.width),
        float(BACKGROUND_INTENSITY), dtype=np.float64,
    )
    for i in range(len(shapes)):
        color = colors[color_order[i]]
        for t in range(num_frames):
            mask = visible_masks[i, t]
            for c in range(3):
                frames[t, c][mask] = color[c]
    if config.noise_std > 0:
        frames += rng.normal(0.0, config.noise_std, size=frames.shape)
    return np.clip(np.rint(frames), 0, 255).astype(np.uint8)


def generate_scene(config: SceneConfig, seed: int,
                   shapes: list[ShapeSpec] | None = None) -> VideoSample:
    """Deterministically generate one video sample from (config, seed).

    ``shapes`` overrides the random instance sampling (appearance noise
    stays seeded); depths must be unique.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    if shapes is None:
        shapes = sample_shapes(config, rng)
    elif len(shapes) > len(COLOR_PALETTE):
        raise ValueError("more instances than available colors")
    n = len(shapes)
    bounds = (config.height, config.width)

    amodal = np.zeros((n, config.num_frames, config.height, config.width),
                      dtype=bool)
    for i, shape in enumerate(shapes):
        centers = shape_trajectory(shape, config.num_frames, bounds,
                                   config.bounce)
        for t in range(config.num_frames):
            amodal[i, t] = _rasterize_at(shape.kind, shape.size,
                                         tuple(centers[t]), bounds)

    depths = np.array([s.depth for s in shapes], dtype=np.int64)
    visible = np.zeros_like(amodal)
    for t in range(config.num_frames):
        visible[:, t] = compose_visible(amodal[:, t], depths)

    frames = render_frames(shapes, visible, config, rng)

    first_visible = np.full(n, config.num_frames, dtype=np.int64)
    for i in range(n):
        nonempty = np.flatnonzero(visible[i].any(axis=(1, 2)))
        if nonempty.size:
            first_visible[i] = nonempty[0]
        # no amodal mask until the instance has been visible once
        amodal[i, : first_visible[i]] = False

    return VideoSample(
        frames=frames,
        visible_masks=visible,
        amodal_masks=amodal,
        categories=np.array([s.category for s in shapes], dtype=np.int64),
        depths=depths,
        first_visible_frame=first_visible,
        shapes=shapes,
    )


def generate_dataset(config: SceneConfig, num_videos: int,
                     seed: int) -> list[VideoSample]:
    """One independently seeded scene per video."""
    return [generate_scene(config, seed + i) for i in range(num_videos)]
