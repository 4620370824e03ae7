"""Affine-invariant depth evaluation: alignment, AbsRel, delta1, boundary PRF.

Depth predictions are compared up to a global scale and shift, so every
metric run starts by least-squares aligning the prediction to the ground
truth (the same closed form the stitcher uses, here with the prediction as
the fitted side).  Alignment can be fitted once per sequence (default, the
temporally strict protocol) or per frame.

Metrics over jointly valid pixels:

* abs_rel   mean |pred - gt| / gt
* delta1    fraction with max(pred/gt, gt/pred) < 1.25 (strict)
* boundary  precision/recall/F1 of depth-ratio edges: a 4-neighbor pixel
            pair is a boundary when max/min ratio exceeds a threshold;
            scores are averaged over a threshold ladder and flagged
            undefined when the ground truth has no boundary pairs at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .stitching import AffineParams, fit_affine, apply_affine
from .tensors import DepthMap, DepthSequence

__all__ = [
    "MetricDomainError",
    "MetricReport",
    "DEFAULT_BOUNDARY_THRESHOLDS",
    "DELTA1_RATIO",
    "align_for_eval",
    "abs_rel",
    "delta1",
    "boundary_prf",
    "evaluate_sequence",
]

DEFAULT_BOUNDARY_THRESHOLDS = (1.05, 1.10, 1.15, 1.20, 1.25)
DELTA1_RATIO = 1.25

GRANULARITIES = ("per_sequence", "per_frame")


class MetricDomainError(ValueError):
    """Metric preconditions violated: empty joint mask or non-positive depths."""


@dataclass(frozen=True)
class MetricReport:
    """One evaluation run: scores, the alignment used, and the recipe."""

    abs_rel: float
    delta1: float
    b_recall: Optional[float]
    b_f1: Optional[float]
    alignment: Union[AffineParams, tuple[AffineParams, ...]]
    valid_pixel_count: int
    granularity: str = "per_sequence"
    boundary_thresholds: tuple[float, ...] = DEFAULT_BOUNDARY_THRESHOLDS

    def __post_init__(self):
        if not (np.isfinite(self.abs_rel) and self.abs_rel >= 0):
            raise ValueError(f"abs_rel must be finite and >= 0, got {self.abs_rel}")
        if not (0.0 <= self.delta1 <= 1.0):
            raise ValueError(f"delta1 must lie in [0, 1], got {self.delta1}")
        if (self.b_recall is None) != (self.b_f1 is None):
            raise ValueError("b_recall and b_f1 must be defined (or undefined) together")
        for name in ("b_recall", "b_f1"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.valid_pixel_count < 1:
            raise ValueError("a metric report needs at least one valid pixel")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")


def _values_and_mask(x) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, (DepthMap, DepthSequence)):
        return x.values, x.valid
    raise TypeError(f"expected DepthMap or DepthSequence, got {type(x).__name__}")


def _joint(pred, gt) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pv, pm = _values_and_mask(pred)
    gv, gm = _values_and_mask(gt)
    if pv.shape != gv.shape:
        raise ValueError(f"pred shape {pv.shape} does not match gt shape {gv.shape}")
    joint = pm & gm
    if not joint.any():
        raise MetricDomainError("no jointly valid pixels")
    return pv, gv, joint


def align_for_eval(
    pred: DepthSequence, gt: DepthSequence, granularity: str = "per_sequence"
):
    """Least-squares align pred onto gt; returns (aligned, params).

    per_sequence fits one (scale, shift) over every jointly valid pixel and
    ``params`` is a single :class:`AffineParams`; per_frame fits each frame
    independently and ``params`` is a tuple with one entry per frame.
    Degenerate fits propagate: evaluation must not silently fall back.
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"granularity must be one of {GRANULARITIES}, got {granularity!r}")
    pv, gv, joint = _joint(pred, gt)
    if pv.ndim != 3:
        raise ValueError("align_for_eval expects DepthSequence inputs")
    if granularity == "per_sequence":
        params = fit_affine(gv, pv, joint)
        return apply_affine(pred, params), params
    per_frame = []
    aligned = np.array(pred.values, copy=True)
    for f in range(pred.frame_count):
        p = fit_affine(gv[f], pv[f], joint[f])
        aligned[f] = np.where(pred.valid[f], p.scale * pv[f] + p.shift, pv[f])
        per_frame.append(p)
    return DepthSequence(aligned, pred.valid), tuple(per_frame)


def abs_rel(pred_aligned, gt) -> float:
    """Mean of |pred - gt| / gt over jointly valid pixels; gt must be > 0."""
    pv, gv, joint = _joint(pred_aligned, gt)
    g = gv[joint]
    if np.any(g <= 0):
        raise MetricDomainError("abs_rel needs positive ground-truth depth on valid pixels")
    return float(np.mean(np.abs(pv[joint] - g) / g))


def delta1(pred_aligned, gt) -> float:
    """Fraction of jointly valid pixels with max(pred/gt, gt/pred) < 1.25."""
    pv, gv, joint = _joint(pred_aligned, gt)
    p, g = pv[joint], gv[joint]
    if np.any(p <= 0) or np.any(g <= 0):
        raise MetricDomainError("delta1 needs positive depths on valid pixels")
    ratio = np.maximum(p / g, g / p)
    return float(np.mean(ratio < DELTA1_RATIO))


def _pair_ratios(values: np.ndarray, valid: np.ndarray, axis: int):
    """Neighbor-pair max/min ratios along one spatial axis of one frame."""
    if axis == 0:
        a, b = values[:-1, :], values[1:, :]
        m = valid[:-1, :] & valid[1:, :]
    else:
        a, b = values[:, :-1], values[:, 1:]
        m = valid[:, :-1] & valid[:, 1:]
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    ratio = np.ones_like(hi)
    np.divide(hi, lo, out=ratio, where=m)
    return ratio, m


def _boundary_masks(values: np.ndarray, valid: np.ndarray, thresholds) -> list[np.ndarray]:
    """Per-threshold flat boolean arrays over all 4-neighbor pairs of a frame."""
    rv, mv = _pair_ratios(values, valid, 0)
    rh, mh = _pair_ratios(values, valid, 1)
    out = []
    for t in thresholds:
        out.append(
            np.concatenate([(mv & (rv > t)).ravel(), (mh & (rh > t)).ravel()])
        )
    return out


def boundary_prf(pred_aligned, gt, ratio_thresholds=DEFAULT_BOUNDARY_THRESHOLDS):
    """Boundary recall, precision, and F1 averaged over ratio thresholds.

    A pair counts as a boundary in a map when both its pixels are valid in
    that map and their depth ratio exceeds the threshold.  Thresholds at
    which the ground truth has no boundary pairs are skipped; when that is
    every threshold the metric is undefined and (None, None, None) is
    returned.  An empty predicted boundary set scores precision 0 by
    convention, and F1 is 0 whenever precision + recall is 0.
    """
    thresholds = [float(t) for t in ratio_thresholds]
    if not thresholds:
        raise ValueError("ratio_thresholds must be non-empty")
    if any(t <= 1.0 for t in thresholds):
        raise ValueError("ratio thresholds must all exceed 1")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("ratio thresholds must be sorted ascending")
    pv, pm = _values_and_mask(pred_aligned)
    gv, gm = _values_and_mask(gt)
    if pv.shape != gv.shape:
        raise ValueError(f"pred shape {pv.shape} does not match gt shape {gv.shape}")
    if np.any(pv[pm] <= 0) or np.any(gv[gm] <= 0):
        raise MetricDomainError("boundary metrics need positive depths on valid pixels")
    if pv.ndim == 2:
        pv, pm, gv, gm = pv[None], pm[None], gv[None], gm[None]

    n_thr = len(thresholds)
    gt_counts = np.zeros(n_thr, dtype=np.int64)
    pred_counts = np.zeros(n_thr, dtype=np.int64)
    inter_counts = np.zeros(n_thr, dtype=np.int64)
    for f in range(pv.shape[0]):
        g_masks = _boundary_masks(gv[f], gm[f], thresholds)
        p_masks = _boundary_masks(pv[f], pm[f], thresholds)
        for i in range(n_thr):
            gt_counts[i] += g_masks[i].sum()
            pred_counts[i] += p_masks[i].sum()
            inter_counts[i] += (g_masks[i] & p_masks[i]).sum()

    recalls, precisions, f1s = [], [], []
    for i in range(n_thr):
        if gt_counts[i] == 0:
            continue
        r = inter_counts[i] / gt_counts[i]
        p = inter_counts[i] / pred_counts[i] if pred_counts[i] > 0 else 0.0
        f1 = 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0
        recalls.append(r)
        precisions.append(p)
        f1s.append(f1)
    if not recalls:
        return None, None, None
    return (
        float(np.mean(recalls)),
        float(np.mean(precisions)),
        float(np.mean(f1s)),
    )


def evaluate_sequence(
    pred: DepthSequence,
    gt: DepthSequence,
    granularity: str = "per_sequence",
    boundary_thresholds=DEFAULT_BOUNDARY_THRESHOLDS,
) -> MetricReport:
    """Align pred to gt, then compute the full metric battery."""
    aligned, params = align_for_eval(pred, gt, granularity)
    _, _, joint = _joint(aligned, gt)
    recall, _, f1 = boundary_prf(aligned, gt, boundary_thresholds)
    return MetricReport(
        abs_rel=abs_rel(aligned, gt),
        delta1=delta1(aligned, gt),
        b_recall=recall,
        b_f1=f1,
        alignment=params,
        valid_pixel_count=int(joint.sum()),
        granularity=granularity,
        boundary_thresholds=tuple(float(t) for t in boundary_thresholds),
    )
