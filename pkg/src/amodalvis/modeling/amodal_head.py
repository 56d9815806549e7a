"""Amodal mask head with spatiotemporal attention priors.

Amodal masks are decoded from the global prototypes in ``num_layers``
rounds. Each round re-extracts amodal masks, unions them with the clip's
visible masks into a per-prototype binary prior, and uses that prior as an
additive attention mask (0 on the prior region, -inf elsewhere) when
cross-attending the prototypes over the clip's attention features. The
visible union is the short-range cue (an occluded part may be visible in a
neighboring frame); the amodal union is the long-range cue carried across
clips by the global prototypes.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .heads import MaskEmbeddingMLP, binarize_logits, correlate_masks

NEG_INF = float("-inf")


class AmodalFeatureExtractor(nn.Module):
    """Stack of 3x3 stride-1 convolutions, tapped at the midpoint.

    The first half of the stack yields the attention (key/value) feature,
    the full stack yields the mask (pixel embedding) feature. Spatial shape
    is preserved.
    """

    def __init__(self, embed_dim: int, num_convs: int = 4):
        super().__init__()
        if num_convs < 2 or num_convs % 2:
            raise ValueError("conv layer count must be even and >= 2")
        self.convs = nn.ModuleList(
            nn.Conv2d(embed_dim, embed_dim, 3, stride=1, padding=1)
            for _ in range(num_convs))

    def forward(self, features: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (mask_features, attention_features)."""
        x = features
        attention_features = None
        half = len(self.convs) // 2
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i == half - 1:
                attention_features = x
            if i < len(self.convs) - 1:
                x = F.relu(x)
        return x, attention_features


def build_prior_mask(visible_masks: torch.Tensor, amodal_masks: torch.Tensor,
                     use_visible_prior: bool, use_amodal_prior: bool,
                     dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Additive attention prior from per-frame binary masks.

    Inputs are (P, T, H, W) bools. The prior for prototype i is the union
    over frames of its visible masks (if enabled) and amodal masks (if
    enabled); the returned (P, H, W) tensor is 0 on the union and -inf
    elsewhere. Rows with an empty union come back all -inf; the attention
    step is responsible for the unrestricted-attention fallback.
    """
    shape = visible_masks.shape if use_visible_prior else amodal_masks.shape
    union = torch.zeros(shape[0], shape[2], shape[3],
                        dtype=torch.bool, device=visible_masks.device)
    if use_visible_prior:
        union |= visible_masks.any(dim=1)
    if use_amodal_prior:
        union |= amodal_masks.any(dim=1)
    prior = torch.full(union.shape, NEG_INF, dtype=dtype, device=union.device)
    return prior.masked_fill(union, 0.0)


class PriorMaskedAttention(nn.Module):
    """Cross-attention with an additive spatial prior, plus residual.

    Keys and values come from the attention features of all clip frames;
    the per-prototype prior is broadcast identically across frames. A
    prototype whose prior row is entirely -inf falls back to unrestricted
    attention for this layer, so softmax never sees an empty support.
    """

    def __init__(self, embed_dim: int):
        super().__init__()
        self.query = nn.Linear(embed_dim, embed_dim, bias=False)
        self.key = nn.Linear(embed_dim, embed_dim, bias=False)
        self.value = nn.Linear(embed_dim, embed_dim, bias=False)

    def attention_weights(self, prototypes: torch.Tensor, keys: torch.Tensor,
                          prior: torch.Tensor) -> torch.Tensor:
        """Row-stochastic weights over the flattened clip positions."""
        num_positions = keys.shape[0]
        positions_per_frame = prior.shape[1] * prior.shape[2]
        num_frames = num_positions // positions_per_frame
        additive = prior.reshape(prior.shape[0], 1, -1)
        additive = additive.expand(-1, num_frames, -1).reshape(prior.shape[0], -1)
        empty_rows = torch.isneginf(additive).all(dim=-1)
        if empty_rows.any():
            additive = torch.where(empty_rows[:, None],
                                   torch.zeros_like(additive), additive)
        scores = self.query(prototypes) @ self.key(keys).T + additive
        return torch.softmax(scores, dim=-1)

    def forward(self, prototypes: torch.Tensor, attention_features: torch.Tensor,
                prior: torch.Tensor) -> torch.Tensor:
        embed_dim = attention_features.shape[1]
        keys = attention_features.permute(0, 2, 3, 1).reshape(-1, embed_dim)
        weights = self.attention_weights(prototypes, keys, prior)
        return weights @ self.value(keys) + prototypes


class PrototypeSelfAttention(nn.Module):
    """Single-head self-attention across prototypes, residual, no positions."""

    def __init__(self, embed_dim: int):
        super().__init__()
        self.query = nn.Linear(embed_dim, embed_dim, bias=False)
        self.key = nn.Linear(embed_dim, embed_dim, bias=False)
        self.value = nn.Linear(embed_dim, embed_dim, bias=False)

    def forward(self, prototypes: torch.Tensor) -> torch.Tensor:
        scores = self.query(prototypes) @ self.key(prototypes).T
        weights = torch.softmax(scores, dim=-1)
        return weights @ self.value(prototypes) + prototypes


class AmodalMaskHead(nn.Module):
    """Decode amodal masks and fold amodal knowledge back into prototypes.

    Per decode layer: extract amodal logits from the current prototypes,
    build the unified spatiotemporal prior from the clip's visible masks
    and the freshly binarized amodal masks, run prior-masked cross
    attention, then prototype self-attention. One final mask extraction
    follows with the fully decoded prototypes. The mask-embedding MLP is
    shared across layers; attention weights are per layer.
    """

    def __init__(self, embed_dim: int, num_layers: int = 2,
                 num_convs: int = 4, use_visible_prior: bool = True,
                 use_amodal_prior: bool = True):
        super().__init__()
        self.num_layers = num_layers
        self.use_visible_prior = use_visible_prior
        self.use_amodal_prior = use_amodal_prior
        self.features = AmodalFeatureExtractor(embed_dim, num_convs)
        self.mask_embed = MaskEmbeddingMLP(embed_dim)
        self.cross_attention = nn.ModuleList(
            PriorMaskedAttention(embed_dim) for _ in range(num_layers))
        self.self_attention = nn.ModuleList(
            PrototypeSelfAttention(embed_dim) for _ in range(num_layers))

    def extract_masks(self, prototypes: torch.Tensor,
                      mask_features: torch.Tensor) -> torch.Tensor:
        return correlate_masks(self.mask_embed(prototypes), mask_features)

    def forward(self, frame_features: torch.Tensor, prototypes: torch.Tensor,
                visible_masks: torch.Tensor,
                ) -> tuple[torch.Tensor, torch.Tensor, list[torch.Tensor]]:
        """Run the full decode.

        frame_features: (T, C, H, W); prototypes: (P, C);
        visible_masks: (P, T, H, W) bool, already binarized.
        Returns (amodal logits (P, T, H, W), updated prototypes,
        per-layer intermediate logits).
        """
        mask_features, attention_features = self.features(frame_features)
        intermediate = []
        for layer in range(self.num_layers):
            amodal_logits = self.extract_masks(prototypes, mask_features)
            intermediate.append(amodal_logits)
            with torch.no_grad():
                amodal_binary = binarize_logits(amodal_logits)
            prior = build_prior_mask(visible_masks, amodal_binary,
                                     self.use_visible_prior,
                                     self.use_amodal_prior,
                                     dtype=frame_features.dtype)
            prototypes = self.cross_attention[layer](
                prototypes, attention_features, prior)
            prototypes = self.self_attention[layer](prototypes)
        amodal_logits = self.extract_masks(prototypes, mask_features)
        return amodal_logits, prototypes, intermediate
