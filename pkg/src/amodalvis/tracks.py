"""Track records: the interchange unit between pipeline and metrics.

A track is one identity over the whole video: a class label, a confidence
score, and full-length visible and amodal mask tubes (empty frames
allowed). Ground-truth tracks use score 1.0. Predictions serialize to a
directory layout mirroring the dataset format (JSON manifest plus stacked
mask PNGs, checksummed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset_io import (
    DatasetError,
    _image_to_mask_stack,
    _mask_stack_to_image,
    _save_png,
    _sha256,
)
from .synthgen import VideoSample

PREDICTION_SCHEMA_VERSION = 1


@dataclass
class TrackRecord:
    """One tracked identity spanning a whole video."""

    track_id: int
    category: int
    score: float
    visible_tube: np.ndarray  # bool, (num_frames, H, W)
    amodal_tube: np.ndarray  # bool, (num_frames, H, W)

    def tube(self, kind: str) -> np.ndarray:
        if kind == "visible":
            return self.visible_tube
        if kind == "amodal":
            return self.amodal_tube
        raise ValueError(f"unknown tube kind {kind!r}")


TrackSet = list[TrackRecord]


def tracks_from_sample(sample: VideoSample) -> TrackSet:
    """Ground-truth tracks of a video sample, score fixed at 1.0."""
    return [
        TrackRecord(
            track_id=i,
            category=int(sample.categories[i]),
            score=1.0,
            visible_tube=sample.visible_masks[i],
            amodal_tube=sample.amodal_masks[i],
        )
        for i in range(sample.num_instances)
    ]


def write_tracks(tracks: TrackSet, video_dir: Path,
                 num_frames: int, height: int, width: int) -> None:
    video_dir = Path(video_dir)
    (video_dir / "masks").mkdir(parents=True, exist_ok=True)
    files = []
    for track in tracks:
        rel = f"masks/visible_id{track.track_id:02d}.png"
        _save_png(_mask_stack_to_image(track.visible_tube), video_dir / rel)
        files.append(rel)
        rel = f"masks/amodal_id{track.track_id:02d}.png"
        _save_png(_mask_stack_to_image(track.amodal_tube), video_dir / rel)
        files.append(rel)
    manifest = {
        "schema_version": PREDICTION_SCHEMA_VERSION,
        "num_frames": int(num_frames),
        "height": int(height),
        "width": int(width),
        "tracks": [
            {"id": int(t.track_id), "category": int(t.category),
             "score": float(t.score)}
            for t in tracks
        ],
        "checksums": {rel: _sha256(video_dir / rel) for rel in files},
    }
    (video_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_tracks(video_dir: Path) -> TrackSet:
    video_dir = Path(video_dir)
    manifest_path = video_dir / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed manifest {manifest_path}: {exc}") from exc
    if manifest.get("schema_version") != PREDICTION_SCHEMA_VERSION:
        raise DatasetError(f"unsupported prediction schema in {manifest_path}")

    for rel, digest in manifest["checksums"].items():
        path = video_dir / rel
        if not path.is_file():
            raise DatasetError(f"missing file referenced by manifest: {path}")
        if _sha256(path) != digest:
            raise DatasetError(f"checksum mismatch: {path}")

    num_frames = manifest["num_frames"]
    tracks = []
    for entry in manifest["tracks"]:
        tid = entry["id"]
        visible = _image_to_mask_stack(
            np.asarray(Image.open(video_dir / f"masks/visible_id{tid:02d}.png")),
            num_frames)
        amodal = _image_to_mask_stack(
            np.asarray(Image.open(video_dir / f"masks/amodal_id{tid:02d}.png")),
            num_frames)
        tracks.append(TrackRecord(
            track_id=int(tid), category=int(entry["category"]),
            score=float(entry["score"]), visible_tube=visible,
            amodal_tube=amodal))
    return tracks


def write_predictions(predictions: dict[str, TrackSet], root: Path,
                      num_frames: int, height: int, width: int) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for name, tracks in predictions.items():
        write_tracks(tracks, root / name, num_frames, height, width)


def read_predictions(root: Path) -> dict[str, TrackSet]:
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"prediction directory not found: {root}")
    out = {}
    for sub in sorted(root.iterdir()):
        if sub.is_dir() and (sub / "manifest.json").exists():
            out[sub.name] = read_tracks(sub)
    return out
