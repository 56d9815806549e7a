"""Global prototype state and its per-clip cross-attention update.

The global prototypes carry object identities across clips. They start
from a learned parameter (identical for every video), and after each clip
they absorb the clip prototypes through a residual cross-attention:
queries come from the global set, keys and values from the clip set. A
row softmax normalizes the affinities by default; the unnormalized
variant is kept behind a switch.
"""

from __future__ import annotations

import torch
from torch import nn


class GlobalPrototypes(nn.Module):
    """Learned initial state for the per-video global prototype set."""

    def __init__(self, num_prototypes: int, embed_dim: int):
        super().__init__()
        self.initial = nn.Parameter(torch.randn(num_prototypes, embed_dim))

    def init_state(self) -> torch.Tensor:
        # clone keeps the graph so downstream losses reach the parameter
        return self.initial.clone()


class PrototypeUpdate(nn.Module):
    """Residual cross-attention of global prototypes over clip prototypes."""

    def __init__(self, embed_dim: int, softmax: bool = True):
        super().__init__()
        self.softmax = softmax
        self.query = nn.Linear(embed_dim, embed_dim, bias=False)
        self.key = nn.Linear(embed_dim, embed_dim, bias=False)
        self.value = nn.Linear(embed_dim, embed_dim, bias=False)

    def forward(self, global_prototypes: torch.Tensor,
                clip_prototypes: torch.Tensor) -> torch.Tensor:
        if global_prototypes.shape[1] != clip_prototypes.shape[1]:
            raise ValueError("prototype sets must share the embedding width")
        affinity = self.query(global_prototypes) @ self.key(clip_prototypes).T
        if self.softmax:
            affinity = torch.softmax(affinity, dim=-1)
        return global_prototypes + affinity @ self.value(clip_prototypes)
