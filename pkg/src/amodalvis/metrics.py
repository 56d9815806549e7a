"""Tracking evaluation: tube AP/AR, HOTA, IDF1 and ID switches.

AP/AR follow the video-level protocol: spatiotemporal tube IoU, greedy
score-descending one-to-one matching per category at IoU thresholds
0.50:0.05:0.95, 101-point precision interpolation, and recall capped at
10 detections per video. HOTA, IDF1 and IDs operate per frame; their
geometry is selectable between masks and tight bounding boxes derived
from masks (boxes by default, the usual protocol for these metrics).

Frame-level matchings are computed in exact rational arithmetic with a
pinned lexicographic tie-break, so results are reproducible bit-for-bit
and checkable against brute-force reference implementations:

- HOTA (per alpha): a pair is eligible in a frame when its IoU >= alpha;
  the frame matching maximizes sum(1000 * assoc + IoU) where assoc is the
  Jaccard overlap of the two tracks' eligible-frame sets.
- IDF1: trajectory-level one-to-one matching maximizing the number of
  frames matched at IoU >= 0.5.
- IDs: frame replay; an existing gt->pred pairing is kept while its IoU
  stays >= 0.5, remaining detections are matched maximizing total IoU,
  and a switch is counted whenever a gt's matched id changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tracks import TrackSet

IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
HOTA_ALPHAS = tuple(Fraction(i, 20) for i in range(1, 20))
OVERLAP_THRESHOLD = Fraction(1, 2)
MAX_DETECTIONS = 10
REPORT_SCHEMA_VERSION = 1


def tube_iou(pred_tube: np.ndarray, gt_tube: np.ndarray) -> float:
    """Spatiotemporal IoU; 1.0 when both tubes are entirely empty."""
    if pred_tube.shape[0] != gt_tube.shape[0]:
        raise ValueError(
            f"frame count mismatch: {pred_tube.shape[0]} vs {gt_tube.shape[0]}")
    inter = int(np.logical_and(pred_tube, gt_tube).sum())
    union = int(np.logical_or(pred_tube, gt_tube).sum())
    if union == 0:
        return 1.0
    return inter / union


def mask_to_box(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Tight (x0, y0, x1, y1) box, inclusive; None for an empty mask."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def _box_iou(a: tuple[int, int, int, int],
             b: tuple[int, int, int, int]) -> Fraction:
    ix = min(a[2], b[2]) - max(a[0], b[0]) + 1
    iy = min(a[3], b[3]) - max(a[1], b[1]) + 1
    inter = max(ix, 0) * max(iy, 0)
    area_a = (a[2] - a[0] + 1) * (a[3] - a[1] + 1)
    area_b = (b[2] - b[0] + 1) * (b[3] - b[1] + 1)
    return Fraction(inter, area_a + area_b - inter)


def _mask_iou(a: np.ndarray, b: np.ndarray) -> Fraction:
    inter = int(np.logical_and(a, b).sum())
    union = int(np.logical_or(a, b).sum())
    return Fraction(inter, union) if union else Fraction(0)


def max_weight_assignment(row_weights: list[dict[int, Fraction]],
                          ) -> list[int | None]:
    """Maximum-weight injective assignment of rows to columns.

    ``row_weights[r]`` maps each eligible column to a nonnegative weight;
    rows may stay unassigned. Ties on total weight resolve to the
    lexicographically smallest choice tuple, columns before "unassigned".
    Exact (weights are rationals), intended for small per-frame problems.
    """
    cols = sorted({c for row in row_weights for c in row})
    col_bit = {c: 1 << i for i, c in enumerate(cols)}
    num_rows = len(row_weights)
    cache: dict[tuple[int, int], Fraction] = {}

    def best(row: int, used: int) -> Fraction:
        if row == num_rows:
            return Fraction(0)
        key = (row, used)
        if key not in cache:
            value = best(row + 1, used)  # leave this row unassigned
            for col, weight in row_weights[row].items():
                bit = col_bit[col]
                if not used & bit:
                    value = max(value, weight + best(row + 1, used | bit))
            cache[key] = value
        return cache[key]

    assignment: list[int | None] = []
    used = 0
    for row in range(num_rows):
        target = best(row, used)
        choice: int | None = None
        for col in sorted(row_weights[row]):
            bit = col_bit[col]
            if used & bit:
                continue
            if row_weights[row][col] + best(row + 1, used | bit) == target:
                choice = col
                used |= bit
                break
        assignment.append(choice)
    return assignment


@dataclass
class _FrameData:
    """Per-frame detections of one video for one tube kind and geometry."""

    gt_ids: list[list[int]]  # per frame, indices of present gt tracks
    pred_ids: list[list[int]]
    similarity: list[dict[tuple[int, int], Fraction]]  # co-present pairs
    gt_lengths: dict[int, int] = field(default_factory=dict)
    pred_lengths: dict[int, int] = field(default_factory=dict)


def _frame_data(preds: TrackSet, gts: TrackSet, tube: str,
                geometry: str) -> _FrameData:
    if geometry not in ("mask", "box"):
        raise ValueError(f"unknown geometry {geometry!r}")
    num_frames = (gts[0].tube(tube).shape[0] if gts
                  else preds[0].tube(tube).shape[0] if preds else 0)
    data = _FrameData(gt_ids=[], pred_ids=[], similarity=[])
    for t in range(num_frames):
        gt_present, pred_present = [], []
        gt_geom, pred_geom = {}, {}
        for i, track in enumerate(gts):
            mask = track.tube(tube)[t]
            if mask.any():
                gt_present.append(i)
                gt_geom[i] = mask_to_box(mask) if geometry == "box" else mask
                data.gt_lengths[i] = data.gt_lengths.get(i, 0) + 1
        for j, track in enumerate(preds):
            mask = track.tube(tube)[t]
            if mask.any():
                pred_present.append(j)
                pred_geom[j] = mask_to_box(mask) if geometry == "box" else mask
                data.pred_lengths[j] = data.pred_lengths.get(j, 0) + 1
        sim = {}
        for i in gt_present:
            for j in pred_present:
                if geometry == "box":
                    sim[(i, j)] = _box_iou(gt_geom[i], pred_geom[j])
                else:
                    sim[(i, j)] = _mask_iou(gt_geom[i], pred_geom[j])
        data.gt_ids.append(gt_present)
        data.pred_ids.append(pred_present)
        data.similarity.append(sim)
    return data


def _greedy_video_matches(pred_entries: list[tuple[float, int, int]],
                          gt_indices: list[int],
                          iou: dict[tuple[int, int], float],
                          threshold: float) -> list[bool]:
    """Greedy one-to-one tube matching inside one video.

    pred_entries: (score, track_id, index) sorted descending by score with
    track-id tie-break; returns a TP flag per entry in that order. Each
    prediction takes the unmatched gt with the highest IoU >= threshold,
    lowest gt index on ties.
    """
    taken: set[int] = set()
    flags = []
    for _, _, pred_idx in pred_entries:
        best_gt = None
        best_iou = 0.0
        for gt_idx in gt_indices:
            if gt_idx in taken:
                continue
            value = iou.get((pred_idx, gt_idx), 0.0)
            if value >= threshold and (best_gt is None or value > best_iou):
                best_gt, best_iou = gt_idx, value
        if best_gt is None:
            flags.append(False)
        else:
            taken.add(best_gt)
            flags.append(True)
    return flags


def _interpolated_ap(tp_flags: np.ndarray, n_gt: int) -> float:
    """101-point interpolated average precision for one sorted det list."""
    if len(tp_flags) == 0 or n_gt == 0:
        return 0.0
    tp_cum = np.cumsum(tp_flags)
    fp_cum = np.cumsum(~tp_flags)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    interp = np.zeros(101)
    for k, r in enumerate(np.linspace(0.0, 1.0, 101)):
        idx = np.searchsorted(recall, r, side="left")
        if idx < len(envelope):
            interp[k] = envelope[idx]
    return float(interp.mean())


def video_ap_ar(preds: list[TrackSet], gts: list[TrackSet],
                tube: str = "visible",
                thresholds: tuple[float, ...] = IOU_THRESHOLDS,
                max_detections: int = MAX_DETECTIONS,
                ) -> tuple[float, float, dict[float, dict[str, float]]]:
    """Dataset AP and AR over mask tubes, plus per-threshold P/R.

    AP is the mean, over thresholds and ground-truth categories, of the
    101-point interpolated AP of the score-sorted detection list. AR is
    the mean, over thresholds and categories, of recall with at most
    ``max_detections`` detections per video.
    """
    # keep only gt tracks with a nonempty tube for this pass
    gt_kept = [[g for g in video if g.tube(tube).any()] for video in gts]
    categories = sorted({g.category for video in gt_kept for g in video})

    # tube IoU tables per video, same-category pairs only
    iou_tables: list[dict[tuple[int, int], float]] = []
    for p_video, g_video in zip(preds, gt_kept):
        table = {}
        for pi, p in enumerate(p_video):
            for gi, g in enumerate(g_video):
                if p.category == g.category:
                    table[(pi, gi)] = tube_iou(p.tube(tube), g.tube(tube))
        iou_tables.append(table)

    ap_values, recall_values = [], []
    per_threshold: dict[float, dict[str, float]] = {}
    for threshold in thresholds:
        tp_total = fp_total = gt_total = 0
        for category in categories:
            dets = []  # (score, video, track_id, tp_flag)
            n_gt = 0
            capped_matched = 0
            for v, (p_video, g_video) in enumerate(zip(preds, gt_kept)):
                gt_indices = [gi for gi, g in enumerate(g_video)
                              if g.category == category]
                n_gt += len(gt_indices)
                entries = sorted(
                    ((p.score, p.track_id, pi)
                     for pi, p in enumerate(p_video)
                     if p.category == category),
                    key=lambda e: (-e[0], e[1]))
                flags = _greedy_video_matches(entries, gt_indices,
                                              iou_tables[v], threshold)
                dets.extend((e[0], v, e[1], f)
                            for e, f in zip(entries, flags))
                capped = entries[:max_detections]
                capped_matched += sum(_greedy_video_matches(
                    capped, gt_indices, iou_tables[v], threshold))
            if n_gt == 0:
                continue
            dets.sort(key=lambda d: (-d[0], d[1], d[2]))
            tp_flags = np.array([d[3] for d in dets], dtype=bool)
            tp_total += int(tp_flags.sum())
            fp_total += int((~tp_flags).sum())
            gt_total += n_gt
            ap_values.append(_interpolated_ap(tp_flags, n_gt))
            recall_values.append(capped_matched / n_gt)
        per_threshold[threshold] = {
            "precision": (tp_total / (tp_total + fp_total)
                          if tp_total + fp_total else 0.0),
            "recall": tp_total / gt_total if gt_total else 0.0,
        }

    ap = float(np.mean(ap_values)) if ap_values else 0.0
    ar = float(np.mean(recall_values)) if recall_values else 0.0
    return ap, ar, per_threshold


def hota(preds: list[TrackSet], gts: list[TrackSet], tube: str = "visible",
         geometry: str = "box",
         alphas: tuple[Fraction, ...] = HOTA_ALPHAS) -> float:
    """Mean over alphas of sqrt(detection accuracy * association accuracy)."""
    videos = [_frame_data(p, g, tube, geometry) for p, g in zip(preds, gts)]
    scores = []
    for alpha in alphas:
        tp = fn = fp = 0
        ass_sum = Fraction(0)
        for data in videos:
            pot: dict[tuple[int, int], int] = {}
            for sim in data.similarity:
                for pair, value in sim.items():
                    if value >= alpha:
                        pot[pair] = pot.get(pair, 0) + 1
            a_pot = {
                pair: Fraction(count,
                               data.gt_lengths[pair[0]]
                               + data.pred_lengths[pair[1]] - count)
                for pair, count in pot.items()
            }
            matched: dict[tuple[int, int], int] = {}
            for t in range(len(data.gt_ids)):
                rows = data.gt_ids[t]
                weights = []
                for g in rows:
                    row = {}
                    for j in data.pred_ids[t]:
                        sim = data.similarity[t].get((g, j))
                        if sim is not None and sim >= alpha:
                            row[j] = 1000 * a_pot[(g, j)] + sim
                    weights.append(row)
                assignment = max_weight_assignment(weights)
                num_matched = sum(1 for c in assignment if c is not None)
                tp += num_matched
                fn += len(rows) - num_matched
                fp += len(data.pred_ids[t]) - num_matched
                for g, j in zip(rows, assignment):
                    if j is not None:
                        matched[(g, j)] = matched.get((g, j), 0) + 1
            for (g, j), count in matched.items():
                ass_sum += count * Fraction(
                    count,
                    data.gt_lengths[g] + data.pred_lengths[j] - count)
        if tp + fn + fp == 0:
            scores.append(1.0)
        elif tp == 0:
            scores.append(0.0)
        else:
            det_acc = tp / (tp + fn + fp)
            ass_acc = float(ass_sum) / tp
            scores.append(float(np.sqrt(det_acc * ass_acc)))
    return float(np.mean(scores)) if scores else 1.0


def idf1_ids(preds: list[TrackSet], gts: list[TrackSet],
             tube: str = "visible", geometry: str = "box",
             overlap_threshold: Fraction = OVERLAP_THRESHOLD,
             ) -> tuple[float, int]:
    """Identity-F1 under global trajectory matching, plus switch count."""
    idtp = idfp = idfn = 0
    switches = 0
    for p_video, g_video in zip(preds, gts):
        data = _frame_data(p_video, g_video, tube, geometry)
        # frames where a (gt, pred) pair could keep one identity
        overlap_count: dict[tuple[int, int], int] = {}
        for sim in data.similarity:
            for pair, value in sim.items():
                if value >= overlap_threshold:
                    overlap_count[pair] = overlap_count.get(pair, 0) + 1

        gt_tracks = sorted(data.gt_lengths)
        pred_tracks = sorted(data.pred_lengths)
        if gt_tracks and pred_tracks:
            matrix = np.zeros((len(gt_tracks), len(pred_tracks)), dtype=np.int64)
            for (g, j), count in overlap_count.items():
                matrix[gt_tracks.index(g), pred_tracks.index(j)] = count
            rows, cols = linear_sum_assignment(-matrix)
            video_idtp = int(matrix[rows, cols].sum())
        else:
            video_idtp = 0
        idtp += video_idtp
        idfn += sum(data.gt_lengths.values()) - video_idtp
        idfp += sum(data.pred_lengths.values()) - video_idtp

        # CLEAR replay for switches
        last: dict[int, int] = {}
        for t in range(len(data.gt_ids)):
            sim = data.similarity[t]
            kept: dict[int, int] = {}
            for g in data.gt_ids[t]:
                j = last.get(g)
                if j is not None and sim.get((g, j), Fraction(0)) >= overlap_threshold:
                    kept[g] = j
            free_preds = [j for j in data.pred_ids[t]
                          if j not in kept.values()]
            rows = [g for g in data.gt_ids[t] if g not in kept]
            weights = []
            for g in rows:
                row = {}
                for j in free_preds:
                    value = sim.get((g, j))
                    if value is not None and value >= overlap_threshold:
                        row[j] = value
                weights.append(row)
            assignment = max_weight_assignment(weights)
            matches = dict(kept)
            for g, j in zip(rows, assignment):
                if j is not None:
                    matches[g] = j
            for g, j in matches.items():
                if g in last and last[g] != j:
                    switches += 1
                last[g] = j

    denom = 2 * idtp + idfp + idfn
    idf1 = 2 * idtp / denom if denom else 1.0
    return idf1, switches


@dataclass
class EvalReport:
    """Scores for one evaluation pass (visible or amodal tubes)."""

    ap: float
    ar: float
    hota: float
    idf1: float
    ids: int
    per_threshold: dict[float, dict[str, float]]

    def as_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ar": self.ar,
            "hota": self.hota,
            "idf1": self.idf1,
            "ids": self.ids,
            "per_threshold": {
                f"{t:.2f}": dict(v) for t, v in self.per_threshold.items()
            },
        }


def evaluate_tracking(preds: list[TrackSet], gts: list[TrackSet],
                      tube: str = "visible",
                      tracking_geometry: str = "box") -> EvalReport:
    """Full metric suite for one tube kind over a list of videos."""
    if len(preds) != len(gts):
        raise ValueError("prediction/ground-truth video counts differ")
    ap, ar, per_threshold = video_ap_ar(preds, gts, tube=tube)
    hota_score = hota(preds, gts, tube=tube, geometry=tracking_geometry)
    idf1, ids = idf1_ids(preds, gts, tube=tube, geometry=tracking_geometry)
    return EvalReport(ap=ap, ar=ar, hota=hota_score, idf1=idf1, ids=ids,
                      per_threshold=per_threshold)


def evaluate_dataset(preds: list[TrackSet], gts: list[TrackSet],
                     tracking_geometry: str = "box") -> dict:
    """Visible and amodal passes; returns a versioned report dictionary."""
    visible = evaluate_tracking(preds, gts, tube="visible",
                                tracking_geometry=tracking_geometry)
    amodal = evaluate_tracking(preds, gts, tube="amodal",
                               tracking_geometry=tracking_geometry)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tracking_geometry": tracking_geometry,
        "tracking_iou_threshold": 0.5,
        "visible": visible.as_dict(),
        "amodal": amodal.as_dict(),
    }
