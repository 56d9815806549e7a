"""Amodal-aware video instance segmentation at desk scale.

Synthetic occluded videos with exact visible/amodal ground truth, a
clip-based prototype tracking model with a spatiotemporal-prior amodal
mask head, a Hungarian set-prediction loss, and a full tracking metric
suite (tube AP/AR, HOTA, IDF1, ID switches).
"""

from .config import load_config, validate_config
from .estimator import AmodalVideoSegmenter
from .metrics import (
    EvalReport,
    evaluate_dataset,
    evaluate_tracking,
    hota,
    idf1_ids,
    tube_iou,
    video_ap_ar,
)
from .pipeline import (
    build_model,
    forward_video,
    infer_video,
    load_checkpoint,
    save_checkpoint,
    split_into_clips,
    train,
    train_on_samples,
)
from .synthgen import (
    SceneConfig,
    ShapeSpec,
    VideoSample,
    compose_visible,
    generate_dataset,
    generate_scene,
    rasterize_amodal,
)
from .tracks import TrackRecord, TrackSet, tracks_from_sample

__version__ = "0.1.0"

__all__ = [
    "AmodalVideoSegmenter",
    "EvalReport",
    "SceneConfig",
    "ShapeSpec",
    "TrackRecord",
    "TrackSet",
    "VideoSample",
    "build_model",
    "compose_visible",
    "evaluate_dataset",
    "evaluate_tracking",
    "forward_video",
    "generate_dataset",
    "generate_scene",
    "hota",
    "idf1_ids",
    "infer_video",
    "load_checkpoint",
    "load_config",
    "rasterize_amodal",
    "save_checkpoint",
    "split_into_clips",
    "train",
    "train_on_samples",
    "tracks_from_sample",
    "tube_iou",
    "validate_config",
    "video_ap_ar",
]
