"""Input validation helpers for the estimator and public functions."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset_io import read_dataset, read_video
from .synthgen import VideoSample


def check_frames(frames, frame_height: int | None = None,
                 frame_width: int | None = None) -> np.ndarray:
    """Validate a frame array: uint8, shape (num_frames, 3, H, W)."""
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ValueError(
            f"frames must have shape (num_frames, 3, H, W), got "
            f"{frames.shape}")
    if frames.dtype != np.uint8:
        raise ValueError(f"frames must be uint8, got {frames.dtype}")
    if frames.shape[0] == 0:
        raise ValueError("video has no frames")
    if frame_height is not None and frames.shape[2] != frame_height:
        raise ValueError(
            f"frame height {frames.shape[2]} does not match the configured "
            f"{frame_height}")
    if frame_width is not None and frames.shape[3] != frame_width:
        raise ValueError(
            f"frame width {frames.shape[3]} does not match the configured "
            f"{frame_width}")
    return frames


def check_sample(sample: VideoSample) -> VideoSample:
    """Consistency checks on one ground-truth sample."""
    check_frames(sample.frames)
    for name in ("visible_masks", "amodal_masks"):
        masks = getattr(sample, name)
        if masks.ndim != 4:
            raise ValueError(f"{name} must be 4-D (N, num_frames, H, W)")
        if masks.dtype != bool:
            raise ValueError(f"{name} must be boolean")
        if masks.shape[1:] != (sample.frames.shape[0], *sample.frame_size):
            raise ValueError(f"{name} shape {masks.shape} does not match "
                             f"the frames")
    n = sample.visible_masks.shape[0]
    for name in ("categories", "depths", "first_visible_frame"):
        if getattr(sample, name).shape != (n,):
            raise ValueError(f"{name} must have one entry per instance")
    if np.logical_and(sample.visible_masks, ~sample.amodal_masks).any():
        raise ValueError("visible masks must be contained in amodal masks")
    return sample


def as_samples(data) -> list[VideoSample]:
    """Normalize estimator input into a list of validated samples.

    Accepts a dataset directory (str or Path), a single sample, or an
    iterable of samples.
    """
    if isinstance(data, (str, Path)):
        path = Path(data)
        if (path / "manifest.json").exists():
            return [check_sample(read_video(path))]
        return [check_sample(s) for s in read_dataset(path)]
    if isinstance(data, VideoSample):
        return [check_sample(data)]
    samples = list(data)
    if not samples:
        raise ValueError("no videos given")
    return [check_sample(s) for s in samples]
