"""On-disk dataset format: PNG frames, per-instance mask stacks, manifest.

Layout, one directory per video::

    <root>/video_0000/
        manifest.json
        frames/frame_0000.png ...          RGB, lossless
        masks/visible_00.png ...           (num_frames * H, W) stacked, 0/255
        masks/amodal_00.png ...

The manifest carries schema version, per-instance attributes and a sha256
checksum for every referenced file; reads verify checksums and fail loudly
naming the offending file.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .synthgen import VideoSample

MANIFEST_SCHEMA_VERSION = 1


class DatasetError(Exception):
    """Raised when a dataset directory is malformed or corrupt."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _save_png(array: np.ndarray, path: Path) -> None:
    Image.fromarray(array).save(path, format="PNG")


def _mask_stack_to_image(mask_tube: np.ndarray) -> np.ndarray:
    """(num_frames, H, W) bool -> (num_frames * H, W) uint8 in {0, 255}."""
    num_frames, height, width = mask_tube.shape
    return (mask_tube.reshape(num_frames * height, width) * np.uint8(255))


def _image_to_mask_stack(img: np.ndarray, num_frames: int) -> np.ndarray:
    height = img.shape[0] // num_frames
    return img.reshape(num_frames, height, img.shape[1]) > 127


def write_video(sample: VideoSample, video_dir: Path) -> None:
    """Write one sample; overwrites files already present."""
    video_dir = Path(video_dir)
    (video_dir / "frames").mkdir(parents=True, exist_ok=True)
    (video_dir / "masks").mkdir(parents=True, exist_ok=True)

    files = []
    for t in range(sample.num_frames):
        rel = f"frames/frame_{t:04d}.png"
        _save_png(sample.frames[t].transpose(1, 2, 0), video_dir / rel)
        files.append(rel)
    for i in range(sample.num_instances):
        rel = f"masks/visible_{i:02d}.png"
        _save_png(_mask_stack_to_image(sample.visible_masks[i]), video_dir / rel)
        files.append(rel)
        rel = f"masks/amodal_{i:02d}.png"
        _save_png(_mask_stack_to_image(sample.amodal_masks[i]), video_dir / rel)
        files.append(rel)

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "num_frames": int(sample.num_frames),
        "height": int(sample.frames.shape[2]),
        "width": int(sample.frames.shape[3]),
        "num_instances": int(sample.num_instances),
        "categories": [int(c) for c in sample.categories],
        "depths": [int(d) for d in sample.depths],
        "first_visible_frame": [
            None if int(f) >= sample.num_frames else int(f)
            for f in sample.first_visible_frame
        ],
        "checksums": {rel: _sha256(video_dir / rel) for rel in files},
    }
    (video_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_video(video_dir: Path) -> VideoSample:
    """Load and verify one video directory."""
    video_dir = Path(video_dir)
    manifest_path = video_dir / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed manifest {manifest_path}: {exc}") from exc

    for key in ("schema_version", "num_frames", "num_instances", "checksums",
                "categories", "depths", "first_visible_frame"):
        if key not in manifest:
            raise DatasetError(f"manifest {manifest_path} missing key {key!r}")
    if manifest["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise DatasetError(
            f"unsupported manifest schema {manifest['schema_version']} "
            f"in {manifest_path}"
        )

    for rel, digest in manifest["checksums"].items():
        path = video_dir / rel
        if not path.is_file():
            raise DatasetError(f"missing file referenced by manifest: {path}")
        if _sha256(path) != digest:
            raise DatasetError(f"checksum mismatch: {path}")

    num_frames = manifest["num_frames"]
    num_instances = manifest["num_instances"]

    frames = np.stack([
        np.asarray(Image.open(video_dir / f"frames/frame_{t:04d}.png"))
        .transpose(2, 0, 1)
        for t in range(num_frames)
    ])
    visible = np.stack([
        _image_to_mask_stack(
            np.asarray(Image.open(video_dir / f"masks/visible_{i:02d}.png")),
            num_frames)
        for i in range(num_instances)
    ]) if num_instances else np.zeros(
        (0, num_frames, manifest["height"], manifest["width"]), dtype=bool)
    amodal = np.stack([
        _image_to_mask_stack(
            np.asarray(Image.open(video_dir / f"masks/amodal_{i:02d}.png")),
            num_frames)
        for i in range(num_instances)
    ]) if num_instances else np.zeros_like(visible)

    first_visible = np.array(
        [num_frames if f is None else int(f)
         for f in manifest["first_visible_frame"]],
        dtype=np.int64,
    )
    return VideoSample(
        frames=frames,
        visible_masks=visible,
        amodal_masks=amodal,
        categories=np.array(manifest["categories"], dtype=np.int64),
        depths=np.array(manifest["depths"], dtype=np.int64),
        first_visible_frame=first_visible,
    )


def video_dirs(root: Path) -> list[Path]:
    """Video subdirectories of a dataset root, sorted by name."""
    root = Path(root)
    return sorted(p for p in root.iterdir()
                  if p.is_dir() and (p / "manifest.json").exists())


def write_dataset(samples: list[VideoSample], root: Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for idx, sample in enumerate(samples):
        write_video(sample, root / f"video_{idx:04d}")


def read_dataset(root: Path) -> list[VideoSample]:
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    return [read_video(d) for d in video_dirs(root)]
