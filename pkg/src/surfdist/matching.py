"""Instance matching, detection metrics over IoU thresholds, and candidate NMS.

Matching is optimal (Hungarian) on the pairwise IoU matrix restricted to
pairs at or above the threshold.  Panoptic quality uses the standard
definition (sum of matched IoU) / (TP + FP/2 + FN/2); all 0/0 ratios are 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .instance import InstanceShape
from .volume import LabelVolume, voxelize

DEFAULT_TAUS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

METRIC_NAMES = ("precision", "recall", "accuracy", "f1", "panoptic_quality")


@dataclass(frozen=True)
class MatchReport:
    tau: float
    pairs: tuple          # (true_id, pred_id, iou) triples
    tp: int
    fp: int
    fn: int


def pair_iou(a: LabelVolume, b: LabelVolume) -> float:
    """Intersection over union of two binary masks on the same grid."""
    if a.shape != b.shape:
        raise ValueError("mask grids differ")
    fa = a.labels > 0
    fb = b.labels > 0
    union = np.logical_or(fa, fb).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(fa, fb).sum() / union)


def _iou_matrix(truth: LabelVolume, pred: LabelVolume):
    """Pairwise IoU between every truth and prediction instance label."""
    if truth.shape != pred.shape:
        raise ValueError("volume grids differ")
    t = truth.labels.ravel()
    p = pred.labels.ravel()
    ids_t = np.unique(t[t > 0])
    ids_p = np.unique(p[p > 0])
    iou = np.zeros((len(ids_t), len(ids_p)))
    if len(ids_t) and len(ids_p):
        both = (t > 0) & (p > 0)
        ti = np.searchsorted(ids_t, t[both])
        pi = np.searchsorted(ids_p, p[both])
        inter = np.bincount(ti * len(ids_p) + pi, minlength=len(ids_t) * len(ids_p))
        inter = inter.reshape(len(ids_t), len(ids_p)).astype(float)
        area_t = np.array([(t == i).sum() for i in ids_t], dtype=float)
        area_p = np.array([(p == i).sum() for i in ids_p], dtype=float)
        union = area_t[:, None] + area_p[None, :] - inter
        np.divide(inter, union, out=iou, where=union > 0)
    return ids_t, ids_p, iou


def match_instances(truth: LabelVolume, pred: LabelVolume, tau: float) -> MatchReport:
    """Maximum-weight one-to-one matching of instances with IoU >= tau."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    ids_t, ids_p, iou = _iou_matrix(truth, pred)
    return _match_from_matrix(ids_t, ids_p, iou, tau)


def _match_from_matrix(ids_t, ids_p, iou, tau) -> MatchReport:
    pairs = []
    if iou.size:
        gated = np.where(iou >= tau, iou, 0.0)
        rows, cols = linear_sum_assignment(-gated)
        for r, c in zip(rows, cols):
            if iou[r, c] >= tau:
                pairs.append((int(ids_t[r]), int(ids_p[c]), float(iou[r, c])))
    pairs.sort()
    tp = len(pairs)
    return MatchReport(tau=float(tau), pairs=tuple(pairs),
                       tp=tp, fp=len(ids_p) - tp, fn=len(ids_t) - tp)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(report: MatchReport) -> dict:
    """Precision, recall, accuracy, F1 and panoptic quality for one threshold."""
    tp, fp, fn = report.tp, report.fp, report.fn
    iou_sum = sum(p[2] for p in report.pairs)
    return {
        "precision": _safe_div(tp, tp + fp),
        "recall": _safe_div(tp, tp + fn),
        "accuracy": _safe_div(tp, tp + fp + fn),
        "f1": _safe_div(2 * tp, 2 * tp + fp + fn),
        "panoptic_quality": _safe_div(iou_sum, tp + 0.5 * fp + 0.5 * fn),
    }


def metrics_over_thresholds(truth: LabelVolume, pred: LabelVolume, taus=DEFAULT_TAUS) -> dict:
    """Arithmetic mean of every metric across the threshold list."""
    taus = tuple(taus)
    if not taus:
        raise ValueError("need at least one threshold")
    ids_t, ids_p, iou = _iou_matrix(truth, pred)
    per_tau = [metrics(_match_from_matrix(ids_t, ids_p, iou, tau)) for tau in taus]
    return {name: float(np.mean([m[name] for m in per_tau])) for name in METRIC_NAMES}


@dataclass(frozen=True)
class _CandidateMask:
    lo: np.ndarray
    mask: np.ndarray  # local bool array; empty shape allowed

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.array(self.mask.shape)


def _candidate_mask(shape: InstanceShape, grid_shape, anisotropy, subdiv) -> _CandidateMask:
    vol = voxelize(shape, grid_shape, anisotropy=anisotropy, subdiv=subdiv)
    nz = np.nonzero(vol.labels)
    if len(nz[0]) == 0:
        return _CandidateMask(lo=np.zeros(3, dtype=np.int64), mask=np.zeros((0, 0, 0), dtype=bool))
    lo = np.array([int(a.min()) for a in nz])
    hi = np.array([int(a.max()) for a in nz])
    crop = tuple(slice(l, h + 1) for l, h in zip(lo, hi))
    return _CandidateMask(lo=lo, mask=vol.labels[crop] > 0)


def _mask_iou(a: _CandidateMask, b: _CandidateMask) -> float:
    if a.mask.size == 0 or b.mask.size == 0:
        return 0.0
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    if np.any(lo >= hi):
        return 0.0  # bounding boxes disjoint
    sub_a = a.mask[tuple(slice(l - o, h - o) for l, h, o in zip(lo, hi, a.lo))]
    sub_b = b.mask[tuple(slice(l - o, h - o) for l, h, o in zip(lo, hi, b.lo))]
    inter = np.logical_and(sub_a, sub_b).sum()
    union = a.mask.sum() + b.mask.sum() - inter
    return float(inter / union) if union > 0 else 0.0


def nms(candidates, grid_shape, anisotropy=(1.0, 1.0, 1.0), prob_threshold: float = 0.5,
        iou_threshold: float = 0.5, subdiv: int = 2):
    """Greedy suppression of voxelized candidates by descending probability.

    Candidates are (InstanceShape, probability) pairs.  A candidate is kept
    iff its voxel IoU with every kept candidate does not exceed the
    threshold, so iou_threshold = 1 keeps everything above prob_threshold
    and iou_threshold = 0 suppresses any overlap at all.  Ties in
    probability are resolved by input index.
    """
    if not 0.0 <= prob_threshold <= 1.0 or not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("thresholds must lie in [0, 1]")
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i][1], i))
    masks: dict[int, _CandidateMask] = {}

    def mask_of(i: int) -> _CandidateMask:
        if i not in masks:
            masks[i] = _candidate_mask(candidates[i][0], grid_shape, anisotropy, subdiv)
        return masks[i]

    kept: list[int] = []
    for i in order:
        if candidates[i][1] < prob_threshold:
            continue
        if all(_mask_iou(mask_of(i), mask_of(k)) <= iou_threshold for k in kept):
            kept.append(i)
    return [candidates[i] for i in kept]
