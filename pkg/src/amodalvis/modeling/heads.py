"""Prototype-conditioned output heads.

The visible mask head correlates an MLP embedding of each prototype with
the frame features via a plain dot product; binarization is a strict
sigmoid > 0.5 (equivalently logit > 0), so an all-zero logit map means
"no mask". The classification head runs once per video, after the last
clip, and emits probabilities over the categories plus a trailing
"no object" slot.
"""

from __future__ import annotations

import torch
from torch import nn


class MaskEmbeddingMLP(nn.Module):
    """Two-layer row-wise MLP, hidden width equal to the embedding width."""

    def __init__(self, embed_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(embed_dim, embed_dim),
            nn.ReLU(),
            nn.Linear(embed_dim, embed_dim),
        )

    def forward(self, prototypes: torch.Tensor) -> torch.Tensor:
        return self.net(prototypes)


def correlate_masks(embeddings: torch.Tensor,
                    features: torch.Tensor) -> torch.Tensor:
    """Dot-product mask logits.

    embeddings: (P, C); features: (T, C, H, W) -> logits (P, T, H, W).
    """
    if embeddings.shape[1] != features.shape[1]:
        raise ValueError(
            f"embedding width {embeddings.shape[1]} != feature width "
            f"{features.shape[1]}"
        )
    return torch.einsum("pc,tchw->pthw", embeddings, features)


class VisibleMaskHead(nn.Module):
    """Per-frame visible segmentation logits from global prototypes."""

    def __init__(self, embed_dim: int):
        super().__init__()
        self.embed = MaskEmbeddingMLP(embed_dim)

    def forward(self, prototypes: torch.Tensor,
                features: torch.Tensor) -> torch.Tensor:
        return correlate_masks(self.embed(prototypes), features)


class ClassificationHead(nn.Module):
    """Class-embedding MLP followed by a fully-connected projection."""

    def __init__(self, embed_dim: int, num_categories: int):
        super().__init__()
        self.num_categories = num_categories
        self.embed = MaskEmbeddingMLP(embed_dim)
        self.project = nn.Linear(embed_dim, num_categories + 1)

    def logits(self, prototypes: torch.Tensor) -> torch.Tensor:
        return self.project(self.embed(prototypes))

    def forward(self, prototypes: torch.Tensor) -> torch.Tensor:
        """Probabilities (P, num_categories + 1); last column is ∅."""
        return torch.softmax(self.logits(prototypes), dim=-1)


def binarize_logits(logits: torch.Tensor) -> torch.Tensor:
    """Strict threshold: sigmoid > 0.5, i.e. logit > 0."""
    return logits > 0
