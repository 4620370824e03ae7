"""Differential-matching losses on latent videos, with verified gradients.

Two parameter-free terms compare finite differences of a predicted latent
sequence against a target: a spatial term over the h/w axes and a temporal
term over the frame axis.  Both are L1 penalties normalised by the latent
spatial resolution (channel sums are not divided by C):

    l_sp   = (1 / (F * h * w))       * sum |d pred - d target|   over dh, dw
    l_temp = (1 / ((F - 1) * h * w)) * sum |dt pred - dt target|

The video objective adds a mean-squared-error term over all elements, and
the joint objective mixes in a single-image report.  All gradients are
exact subgradients with the convention sign(0) = 0, and can be verified
numerically with :func:`finite_difference_check`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import LatentSequence

__all__ = [
    "LossWeights",
    "LossReport",
    "spatial_rectification_loss",
    "temporal_rectification_loss",
    "video_objective",
    "joint_objective",
    "finite_difference_check",
]

LOSS_KINDS = ("sp", "temp", "video")


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights for the composite objectives."""

    lambda_sp: float = 0.5
    lambda_temp: float = 0.5
    lambda_image: float = 1.0

    def __post_init__(self):
        for name in ("lambda_sp", "lambda_temp", "lambda_image"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class LossReport:
    """Breakdown of one video objective evaluation.

    total = l2 + lambda_sp * l_sp + lambda_temp * l_temp, checked to 1e-10
    at construction.  ``gradient`` is d(total)/d(pred), same shape as the
    prediction.
    """

    total: float
    l2: float
    l_sp: float
    l_temp: float
    gradient: np.ndarray
    weights: LossWeights = LossWeights()

    def __post_init__(self):
        for name in ("total", "l2", "l_sp", "l_temp"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"LossReport.{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)
        recomposed = (
            self.l2
            + self.weights.lambda_sp * self.l_sp
            + self.weights.lambda_temp * self.l_temp
        )
        if abs(self.total - recomposed) > 1e-10:
            raise ValueError(
                f"LossReport total {self.total} differs from recomposed {recomposed}"
            )
        grad = np.array(self.gradient, dtype=np.float64, copy=True)
        grad.setflags(write=False)
        object.__setattr__(self, "gradient", grad)


def _latent_values(x, name: str) -> np.ndarray:
    if isinstance(x, LatentSequence):
        return x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError(f"{name} must be a (f, c, h, w) latent tensor, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = _latent_values(pred, "pred")
    t = _latent_values(target, "target")
    if p.shape != t.shape:
        raise ValueError(f"pred shape {p.shape} does not match target shape {t.shape}")
    return p, t


# ---------------------------------------------------------------------------
# raw-array kernels (shared by the public API and the FD verifier)


def _sp_value_grad(p: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    f, _, h, w = p.shape
    norm = 1.0 / (f * h * w)
    rh = np.diff(p, axis=2) - np.diff(t, axis=2)
    rw = np.diff(p, axis=3) - np.diff(t, axis=3)
    value = norm * (np.abs(rh).sum() + np.abs(rw).sum())
    grad = np.zeros_like(p)
    sh = np.sign(rh)
    grad[:, :, 1:, :] += sh
    grad[:, :, :-1, :] -= sh
    sw = np.sign(rw)
    grad[:, :, :, 1:] += sw
    grad[:, :, :, :-1] -= sw
    grad *= norm
    return float(value), grad


def _temp_value_grad(p: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    f, _, h, w = p.shape
    if f < 2:
        return 0.0, np.zeros_like(p)
    norm = 1.0 / ((f - 1) * h * w)
    rt = np.diff(p, axis=0) - np.diff(t, axis=0)
    value = norm * np.abs(rt).sum()
    grad = np.zeros_like(p)
    st = np.sign(rt)
    grad[1:] += st
    grad[:-1] -= st
    grad *= norm
    return float(value), grad


def _mse_value_grad(p: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    r = p - t
    n = r.size
    return float((r * r).sum() / n), (2.0 / n) * r


def _video_value_grad(
    p: np.ndarray, t: np.ndarray, weights: LossWeights
) -> tuple[float, float, float, float, np.ndarray]:
    l2, g2 = _mse_value_grad(p, t)
    lsp, gsp = _sp_value_grad(p, t)
    ltemp, gtemp = _temp_value_grad(p, t)
    total = l2 + weights.lambda_sp * lsp + weights.lambda_temp * ltemp
    grad = g2 + weights.lambda_sp * gsp + weights.lambda_temp * gtemp
    return total, l2, lsp, ltemp, grad


# ---------------------------------------------------------------------------
# public API


def spatial_rectification_loss(pred, target) -> tuple[float, np.ndarray]:
    """L1 mismatch of spatial finite differences, normalised by F * h * w.

    Returns (value, gradient w.r.t. pred).  Sums run over both spatial
    differential directions and over channels; the subgradient of |r| at
    r = 0 is taken as 0.
    """
    p, t = _check_pair(pred, target)
    return _sp_value_grad(p, t)


def temporal_rectification_loss(pred, target) -> tuple[float, np.ndarray]:
    """L1 mismatch of frame-to-frame differences, normalised by (F-1) * h * w.

    A single-frame sequence has no temporal structure and yields 0 with a
    zero gradient.
    """
    p, t = _check_pair(pred, target)
    return _temp_value_grad(p, t)


def video_objective(pred, target, weights: LossWeights = LossWeights()) -> LossReport:
    """MSE plus the weighted spatial and temporal differential terms."""
    p, t = _check_pair(pred, target)
    total, l2, lsp, ltemp, grad = _video_value_grad(p, t, weights)
    return LossReport(total, l2, lsp, ltemp, grad, weights)


def joint_objective(
    video_report: LossReport, image_report: LossReport, weights: LossWeights = LossWeights()
) -> float:
    """Video total plus lambda_image times the image total.

    The image report is expected to come from video_objective on a
    single-frame sequence, where the temporal term is 0 by convention.
    """
    return video_report.total + weights.lambda_image * image_report.total


# ---------------------------------------------------------------------------
# gradient verification


def _kink_mask(kind: str, p: np.ndarray, t: np.ndarray, threshold: float) -> np.ndarray:
    """True at pred coordinates whose perturbation crosses an L1 kink.

    A coordinate is excluded when any differential residual it touches is
    smaller than ``threshold`` in magnitude; there the loss is not locally
    linear and central differences are meaningless.
    """
    mask = np.zeros(p.shape, dtype=bool)
    if kind in ("sp", "video"):
        bad_h = np.abs(np.diff(p, axis=2) - np.diff(t, axis=2)) < threshold
        mask[:, :, 1:, :] |= bad_h
        mask[:, :, :-1, :] |= bad_h
        bad_w = np.abs(np.diff(p, axis=3) - np.diff(t, axis=3)) < threshold
        mask[:, :, :, 1:] |= bad_w
        mask[:, :, :, :-1] |= bad_w
    if kind in ("temp", "video") and p.shape[0] >= 2:
        bad_t = np.abs(np.diff(p, axis=0) - np.diff(t, axis=0)) < threshold
        mask[1:] |= bad_t
        mask[:-1] |= bad_t
    return mask


def finite_difference_check(
    loss_kind: str, pred, target, eps: float, weights: LossWeights = LossWeights()
) -> float:
    """Compare the analytic gradient against central differences.

    Returns the maximum over checked coordinates of
    |analytic - numeric| / max(1, |numeric|).  Coordinates within 10 * eps
    of an L1 kink are skipped (see :func:`_kink_mask`); if every coordinate
    is skipped the check vacuously returns 0.
    """
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {loss_kind!r}")
    eps = float(eps)
    if not np.isfinite(eps) or eps <= 0:
        raise ValueError(f"eps must be positive and finite, got {eps}")
    p, t = _check_pair(pred, target)

    if loss_kind == "sp":
        value_of = lambda x: _sp_value_grad(x, t)[0]
        analytic = _sp_value_grad(p, t)[1]
    elif loss_kind == "temp":
        value_of = lambda x: _temp_value_grad(x, t)[0]
        analytic = _temp_value_grad(p, t)[1]
    else:
        value_of = lambda x: _video_value_grad(x, t, weights)[0]
        analytic = _video_value_grad(p, t, weights)[4]

    keep = ~_kink_mask(loss_kind, p, t, 10.0 * eps)
    if not keep.any():
        return 0.0

    work = p.copy()
    max_rel = 0.0
    for idx in np.argwhere(keep):
        idx = tuple(idx)
        orig = work[idx]
        work[idx] = orig + eps
        f_plus = value_of(work)
        work[idx] = orig - eps
        f_minus = value_of(work)
        work[idx] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        rel = abs(analytic[idx] - numeric) / max(1.0, abs(numeric))
        if rel > max_rel:
            max_rel = rel
    return max_rel
