"""Clip-level instance prototype modelling.

A small convolutional encoder turns a clip into per-frame features at 1/4
resolution; a learned-query decoder attends over the flattened clip
features and emits one prototype embedding per query. Each prototype is
meant to bind to one object in the clip, or to nothing.
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

FEATURE_STRIDE = 4


class ClipEncoder(nn.Module):
    """Four conv blocks, downsampling twice (stride 4 overall)."""

    def __init__(self, embed_dim: int, in_channels: int = 3):
        super().__init__()
        self.convs = nn.ModuleList([
            nn.Conv2d(in_channels, embed_dim, 3, stride=2, padding=1),
            nn.Conv2d(embed_dim, embed_dim, 3, stride=1, padding=1),
            nn.Conv2d(embed_dim, embed_dim, 3, stride=2, padding=1),
            nn.Conv2d(embed_dim, embed_dim, 3, stride=1, padding=1),
        ])

    def forward(self, clip: torch.Tensor) -> torch.Tensor:
        x = clip
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = F.relu(x)
        return x


class QueryDecoderLayer(nn.Module):
    """Cross-attention over clip features, then self-attention, then FFN."""

    def __init__(self, embed_dim: int):
        super().__init__()
        self.cross_q = nn.Linear(embed_dim, embed_dim)
        self.cross_k = nn.Linear(embed_dim, embed_dim)
        self.cross_v = nn.Linear(embed_dim, embed_dim)
        self.self_q = nn.Linear(embed_dim, embed_dim)
        self.self_k = nn.Linear(embed_dim, embed_dim)
        self.self_v = nn.Linear(embed_dim, embed_dim)
        self.ffn = nn.Sequential(
            nn.Linear(embed_dim, 2 * embed_dim),
            nn.ReLU(),
            nn.Linear(2 * embed_dim, embed_dim),
        )
        self.scale = 1.0 / math.sqrt(embed_dim)

    def forward(self, queries: torch.Tensor,
                memory: torch.Tensor) -> torch.Tensor:
        attn = torch.softmax(
            self.cross_q(queries) @ self.cross_k(memory).T * self.scale, dim=-1)
        queries = queries + attn @ self.cross_v(memory)
        attn = torch.softmax(
            self.self_q(queries) @ self.self_k(queries).T * self.scale, dim=-1)
        queries = queries + attn @ self.self_v(queries)
        return queries + self.ffn(queries)


class ClipPrototypeModel(nn.Module):
    """Encode a clip and decode clip-level instance prototypes.

    Frame sizes must be divisible by the feature stride; this is checked
    at construction.
    """

    def __init__(self, embed_dim: int, num_prototypes: int,
                 frame_height: int, frame_width: int, num_layers: int = 2):
        super().__init__()
        if frame_height % FEATURE_STRIDE or frame_width % FEATURE_STRIDE:
            raise ValueError(
                f"frame size {frame_height}x{frame_width} not divisible by "
                f"feature stride {FEATURE_STRIDE}"
            )
        self.embed_dim = embed_dim
        self.num_prototypes = num_prototypes
        self.frame_height = frame_height
        self.frame_width = frame_width
        self.encoder = ClipEncoder(embed_dim)
        self.queries = nn.Parameter(torch.randn(num_prototypes, embed_dim))
        self.layers = nn.ModuleList(
            QueryDecoderLayer(embed_dim) for _ in range(num_layers))

    def encode_frames(self, clip: torch.Tensor) -> torch.Tensor:
        """(num_clip_frames, 3, H, W) -> (num_clip_frames, C, H/4, W/4)."""
        if clip.shape[-2] != self.frame_height or clip.shape[-1] != self.frame_width:
            raise ValueError(
                f"clip size {tuple(clip.shape[-2:])} does not match model "
                f"({self.frame_height}, {self.frame_width})"
            )
        return self.encoder(clip)

    def forward(self, clip: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (clip prototypes, frame features)."""
        features = self.encode_frames(clip)
        # keys: all spatial positions of all clip frames
        memory = features.permute(0, 2, 3, 1).reshape(-1, self.embed_dim)
        prototypes = self.queries
        for layer in self.layers:
            prototypes = layer(prototypes, memory)
        return prototypes, features
