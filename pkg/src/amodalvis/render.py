"""Per-frame overlay images: filled visible masks, outlined amodal masks.

Colors are keyed by track id through a fixed palette, so an identity
keeps its color across frames and across runs. With no tracks the raw
frames are written unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .tracks import TrackSet

ID_PALETTE = (
    (255, 64, 64),
    (64, 255, 64),
    (64, 64, 255),
    (255, 255, 64),
    (64, 255, 255),
    (255, 64, 255),
    (255, 160, 64),
    (160, 64, 255),
    (128, 255, 160),
    (255, 128, 160),
)

FILL_ALPHA = 0.55


def color_for_id(track_id: int) -> tuple[int, int, int]:
    return ID_PALETTE[track_id % len(ID_PALETTE)]


def mask_outline(mask: np.ndarray) -> np.ndarray:
    """Boundary pixels: mask minus its 4-neighborhood erosion."""
    if not mask.any():
        return mask
    interior = mask.copy()
    interior[1:, :] &= mask[:-1, :]
    interior[:-1, :] &= mask[1:, :]
    interior[:, 1:] &= mask[:, :-1]
    interior[:, :-1] &= mask[:, 1:]
    interior[0, :] = False
    interior[-1, :] = False
    interior[:, 0] = False
    interior[:, -1] = False
    return mask & ~interior


def render_frame(frame: np.ndarray, tracks: TrackSet, t: int) -> np.ndarray:
    """Composite one frame; ``frame`` is uint8 (3, H, W)."""
    canvas = frame.transpose(1, 2, 0).astype(np.float64)
    for track in sorted(tracks, key=lambda tr: tr.track_id):
        color = np.array(color_for_id(track.track_id), dtype=np.float64)
        visible = track.visible_tube[t]
        if visible.any():
            canvas[visible] = ((1 - FILL_ALPHA) * canvas[visible]
                               + FILL_ALPHA * color)
        outline = mask_outline(track.amodal_tube[t])
        if outline.any():
            canvas[outline] = color
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def render_overlays(frames: np.ndarray, tracks: TrackSet,
                    out_dir: Path) -> list[Path]:
    """Write one composite PNG per frame; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(frames.shape[0]):
        path = out_dir / f"overlay_{t:04d}.png"
        Image.fromarray(render_frame(frames[t], tracks, t)).save(
            path, format="PNG")
        paths.append(path)
    return paths
