from .amodal_head import (
    AmodalFeatureExtractor,
    AmodalMaskHead,
    PriorMaskedAttention,
    PrototypeSelfAttention,
    build_prior_mask,
)
from .heads import (
    ClassificationHead,
    MaskEmbeddingMLP,
    VisibleMaskHead,
    binarize_logits,
    correlate_masks,
)
from .network import VideoOutputs, VideoSegmentationModel, split_into_clips
from .protomodel import FEATURE_STRIDE, ClipEncoder, ClipPrototypeModel
from .update import GlobalPrototypes, PrototypeUpdate

__all__ = [
    "AmodalFeatureExtractor",
    "AmodalMaskHead",
    "ClassificationHead",
    "ClipEncoder",
    "ClipPrototypeModel",
    "FEATURE_STRIDE",
    "GlobalPrototypes",
    "MaskEmbeddingMLP",
    "PriorMaskedAttention",
    "PrototypeSelfAttention",
    "PrototypeUpdate",
    "VideoOutputs",
    "VideoSegmentationModel",
    "VisibleMaskHead",
    "binarize_logits",
    "build_prior_mask",
    "correlate_masks",
    "split_into_clips",
]
