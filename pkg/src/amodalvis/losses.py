"""Hungarian set-prediction loss over visible and amodal mask tubes.

Matching runs once per video over the accumulated tubes: the cost of
pairing a prototype with a ground-truth instance is the negative log
class probability plus the visible and amodal mask BCEs over the whole
video. Given the optimal assignment, the final loss repeats those terms
for matched pairs and pushes every unmatched prototype toward the
"no object" class.

Ground truth is supervised at feature resolution. Visible targets are
defined on every frame (an occluded instance's target is the empty mask);
amodal targets are undefined, and excluded from the mean, on frames
before the instance first becomes visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment
from torch.nn import functional as F

from .synthgen import VideoSample


def downsample_mask(mask: np.ndarray, stride: int) -> np.ndarray:
    """Nearest-neighbor downsample of a binary mask, center sampling."""
    off = stride // 2
    return mask[..., off::stride, off::stride]


def upsample_mask(mask: np.ndarray, stride: int) -> np.ndarray:
    """Nearest-neighbor upsample; exact inverse grid of ``downsample_mask``."""
    return mask.repeat(stride, axis=-2).repeat(stride, axis=-1)


@dataclass
class VideoTargets:
    """Ground-truth tubes at feature resolution, as torch tensors."""

    visible: torch.Tensor  # (N, num_frames, H/4, W/4) bool
    amodal: torch.Tensor  # (N, num_frames, H/4, W/4) bool
    categories: torch.Tensor  # (N,) int64
    amodal_defined: torch.Tensor  # (N, num_frames) bool, t >= first visible


def prepare_targets(sample: VideoSample, stride: int) -> VideoTargets:
    visible = torch.from_numpy(
        downsample_mask(sample.visible_masks, stride).copy())
    amodal = torch.from_numpy(
        downsample_mask(sample.amodal_masks, stride).copy())
    frames = torch.arange(sample.num_frames)
    defined = frames[None, :] >= torch.from_numpy(
        sample.first_visible_frame)[:, None]
    return VideoTargets(
        visible=visible,
        amodal=amodal,
        categories=torch.from_numpy(sample.categories.copy()),
        amodal_defined=defined,
    )


def mask_bce(logits: torch.Tensor, target: torch.Tensor,
             frame_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean per-pixel binary cross-entropy over the defined frames.

    logits, target: (num_frames, H, W); frame_mask: optional (num_frames,)
    bool selecting the frames that carry a defined target. With no defined
    frame the loss is 0.
    """
    if logits.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(logits.shape)} vs "
                         f"{tuple(target.shape)}")
    if frame_mask is not None:
        if not frame_mask.any():
            return logits.sum() * 0.0
        logits = logits[frame_mask]
        target = target[frame_mask]
    return F.binary_cross_entropy_with_logits(
        logits, target.to(logits.dtype), reduction="mean")


def match_cost_matrix(class_logits: torch.Tensor,
                      visible_logits: torch.Tensor,
                      amodal_logits: torch.Tensor | None,
                      targets: VideoTargets,
                      class_weight: float = 1.0,
                      visible_weight: float = 1.0,
                      amodal_weight: float = 1.0) -> np.ndarray:
    """(num_gt, num_prototypes) matching costs, detached from the graph."""
    with torch.no_grad():
        num_gt = targets.visible.shape[0]
        num_proto = class_logits.shape[0]
        log_probs = F.log_softmax(class_logits, dim=-1)
        cost = -class_weight * log_probs[:, targets.categories].T

        vis_target = targets.visible.to(visible_logits.dtype)
        pair_bce = F.binary_cross_entropy_with_logits(
            visible_logits[None].expand(num_gt, -1, -1, -1, -1),
            vis_target[:, None].expand(-1, num_proto, -1, -1, -1),
            reduction="none")
        cost = cost + visible_weight * pair_bce.mean(dim=(2, 3, 4))

        if amodal_logits is not None:
            amo_target = targets.amodal.to(amodal_logits.dtype)
            pair_bce = F.binary_cross_entropy_with_logits(
                amodal_logits[None].expand(num_gt, -1, -1, -1, -1),
                amo_target[:, None].expand(-1, num_proto, -1, -1, -1),
                reduction="none")
            # average only over frames with a defined amodal target
            fm = targets.amodal_defined.to(amodal_logits.dtype)
            per_frame = pair_bce.mean(dim=(3, 4))
            counts = fm.sum(dim=1).clamp(min=1.0)
            cost = cost + amodal_weight * (
                (per_frame * fm[:, None, :]).sum(dim=2) / counts[:, None])
        return cost.cpu().numpy()


def hungarian_match(cost_matrix: np.ndarray) -> np.ndarray:
    """Minimum-cost injective assignment of rows (GT) to columns.

    Returns the assigned column for each row. Among cost-equal optima the
    lexicographically smallest assignment (by row, then column index) is
    chosen.
    """
    cost = np.asarray(cost_matrix, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    num_rows, num_cols = cost.shape
    if num_rows > num_cols:
        raise ValueError(f"cannot match {num_rows} rows into {num_cols} columns")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix must be finite")
    if num_rows == 0:
        return np.empty(0, dtype=np.int64)

    def optimum(sub: np.ndarray) -> float:
        if sub.shape[0] == 0:
            return 0.0
        rows, cols = linear_sum_assignment(sub)
        return float(sub[rows, cols].sum())

    best_total = optimum(cost)
    tol = 1e-9 * max(1.0, abs(best_total))
    assignment = np.empty(num_rows, dtype=np.int64)
    free_cols = list(range(num_cols))
    fixed = 0.0
    for row in range(num_rows):
        rest_rows = np.arange(row + 1, num_rows)
        for col in free_cols:
            rest_cols = [c for c in free_cols if c != col]
            total = fixed + cost[row, col] + optimum(
                cost[np.ix_(rest_rows, rest_cols)])
            if total <= best_total + tol:
                assignment[row] = col
                fixed += cost[row, col]
                free_cols.remove(col)
                break
        else:
            raise RuntimeError("no admissible column found")  # unreachable
    return assignment


def final_loss(class_logits: torch.Tensor, visible_logits: torch.Tensor,
               amodal_logits: torch.Tensor | None, targets: VideoTargets,
               assignment: np.ndarray,
               intermediate_amodal: list[torch.Tensor] = (),
               class_weight: float = 1.0, visible_weight: float = 1.0,
               amodal_weight: float = 1.0) -> torch.Tensor:
    """Training loss given a fixed assignment (no gradient through it)."""
    log_probs = F.log_softmax(class_logits, dim=-1)
    no_object = class_logits.shape[1] - 1
    loss = class_logits.sum() * 0.0

    matched = set()
    for gt_idx, proto_idx in enumerate(assignment):
        proto_idx = int(proto_idx)
        matched.add(proto_idx)
        category = int(targets.categories[gt_idx])
        loss = loss - class_weight * log_probs[proto_idx, category]
        loss = loss + visible_weight * mask_bce(
            visible_logits[proto_idx], targets.visible[gt_idx])
        if amodal_logits is not None:
            loss = loss + amodal_weight * mask_bce(
                amodal_logits[proto_idx], targets.amodal[gt_idx],
                targets.amodal_defined[gt_idx])
            for layer_logits in intermediate_amodal:
                loss = loss + amodal_weight * mask_bce(
                    layer_logits[proto_idx], targets.amodal[gt_idx],
                    targets.amodal_defined[gt_idx])
    for proto_idx in range(class_logits.shape[0]):
        if proto_idx not in matched:
            loss = loss - class_weight * log_probs[proto_idx, no_object]
    return loss
