"""Full video model: clip modelling, prototype update, mask heads.

Per clip, in order: clip prototypes and frame features are produced, the
global prototypes are updated from the clip prototypes, visible masks are
predicted from the updated global prototypes, and the amodal head decodes
amodal masks while refining the global prototypes further. Classification
runs once, after the last clip. Mask tubes are concatenated across clips
at feature resolution, so every prototype owns one visible and one amodal
tube spanning the whole video under a single identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .amodal_head import AmodalMaskHead
from .heads import ClassificationHead, VisibleMaskHead, binarize_logits
from .protomodel import FEATURE_STRIDE, ClipPrototypeModel
from .update import GlobalPrototypes, PrototypeUpdate


def split_into_clips(video: torch.Tensor, clip_length: int) -> list[torch.Tensor]:
    """Consecutive non-overlapping windows along the first axis.

    The last clip keeps the remainder (length 1..clip_length), unpadded.
    """
    if clip_length < 1:
        raise ValueError("clip length must be >= 1")
    num_frames = video.shape[0]
    if num_frames == 0:
        raise ValueError("empty video")
    return [video[start:start + clip_length]
            for start in range(0, num_frames, clip_length)]


@dataclass
class VideoOutputs:
    """Whole-video predictions at feature resolution."""

    visible_logits: torch.Tensor  # (P, num_frames, H/4, W/4)
    amodal_logits: torch.Tensor | None  # same shape, None when head disabled
    class_logits: torch.Tensor  # (P, num_categories + 1)
    class_probs: torch.Tensor
    # per decode layer, whole-video intermediate amodal logits
    intermediate_amodal: list[torch.Tensor] = field(default_factory=list)


class VideoSegmentationModel(nn.Module):
    """End-to-end amodal-aware video instance segmentation network."""

    def __init__(self, num_prototypes: int = 8, embed_dim: int = 32,
                 num_categories: int = 3, frame_height: int = 64,
                 frame_width: int = 64, decoder_layers: int = 2,
                 amodal_enabled: bool = True, amodal_layers: int = 2,
                 amodal_convs: int = 4, use_visible_prior: bool = True,
                 use_amodal_prior: bool = True, update_softmax: bool = True):
        super().__init__()
        self.num_prototypes = num_prototypes
        self.embed_dim = embed_dim
        self.num_categories = num_categories
        self.frame_height = frame_height
        self.frame_width = frame_width
        self.clip_model = ClipPrototypeModel(
            embed_dim, num_prototypes, frame_height, frame_width,
            num_layers=decoder_layers)
        self.update = PrototypeUpdate(embed_dim, softmax=update_softmax)
        self.global_prototypes = GlobalPrototypes(num_prototypes, embed_dim)
        self.visible_head = VisibleMaskHead(embed_dim)
        self.classifier = ClassificationHead(embed_dim, num_categories)
        self.amodal_head = (
            AmodalMaskHead(embed_dim, num_layers=amodal_layers,
                           num_convs=amodal_convs,
                           use_visible_prior=use_visible_prior,
                           use_amodal_prior=use_amodal_prior)
            if amodal_enabled else None
        )

    @property
    def feature_stride(self) -> int:
        return FEATURE_STRIDE

    @property
    def feature_size(self) -> tuple[int, int]:
        return (self.frame_height // FEATURE_STRIDE,
                self.frame_width // FEATURE_STRIDE)

    def forward_video(self, frames: torch.Tensor, clip_length: int,
                      teacher_visible: torch.Tensor | None = None,
                      ) -> VideoOutputs:
        """Process a whole video clip by clip.

        frames: (num_frames, 3, H, W), float in [0, 1].
        teacher_visible: optional (num_frames, H/4, W/4) bool foreground
        union; when given it replaces the predicted visible masks as the
        amodal head's short-range prior input.
        """
        global_protos = self.global_prototypes.init_state()
        visible_chunks = []
        amodal_chunks = []
        intermediate_chunks: list[list[torch.Tensor]] = []
        offset = 0
        for clip in split_into_clips(frames, clip_length):
            clip_protos, features = self.clip_model(clip)
            global_protos = self.update(global_protos, clip_protos)
            visible_logits = self.visible_head(global_protos, features)
            visible_chunks.append(visible_logits)
            if self.amodal_head is not None:
                if teacher_visible is not None:
                    fg = teacher_visible[offset:offset + clip.shape[0]]
                    prior_masks = fg[None].expand(
                        self.num_prototypes, -1, -1, -1)
                else:
                    prior_masks = binarize_logits(visible_logits)
                amodal_logits, global_protos, intermediate = self.amodal_head(
                    features, global_protos, prior_masks)
                amodal_chunks.append(amodal_logits)
                intermediate_chunks.append(intermediate)
            offset += clip.shape[0]

        class_logits = self.classifier.logits(global_protos)
        intermediate_amodal = []
        if self.amodal_head is not None and intermediate_chunks:
            for layer in range(self.amodal_head.num_layers):
                intermediate_amodal.append(torch.cat(
                    [chunk[layer] for chunk in intermediate_chunks], dim=1))
        return VideoOutputs(
            visible_logits=torch.cat(visible_chunks, dim=1),
            amodal_logits=(torch.cat(amodal_chunks, dim=1)
                           if amodal_chunks else None),
            class_logits=class_logits,
            class_probs=torch.softmax(class_logits, dim=-1),
            intermediate_amodal=intermediate_amodal,
        )
