"""Long-video depth stitching by closed-form affine alignment of windows.

A long sequence is processed as overlapping fixed-size windows.  Window
predictions agree with each other only up to a global scale and shift, so
consecutive windows are reconciled by a one-dimensional least-squares fit
on their overlap:

    s = Cov(d_prev, d_cur) / Var(d_cur),   t = mean(d_prev) - s * mean(d_cur)

which minimises ||s * d_cur + t - d_prev||^2 in closed form.  The first
window defines the canonical scale; every later window is fitted against
the already-stitched result (not its raw predecessor, so fit error does
not compound), mapped through the affine, and its overlap frames are
linearly blended in.  The whole chain is deterministic: equal inputs give
bit-equal output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .tensors import DepthMap, DepthSequence

__all__ = [
    "DegenerateOverlapError",
    "AffineParams",
    "WindowPlan",
    "WindowPrediction",
    "WindowFit",
    "StitchResult",
    "plan_windows",
    "fit_affine",
    "apply_affine",
    "blend_overlap",
    "stitch_sequence",
    "stitch_sequence_detailed",
]

# Relative variance floor below which an overlap is treated as constant.
DEGENERACY_THRESHOLD = 1e-12


class DegenerateOverlapError(ValueError):
    """The overlap region carries no fittable structure (constant values)."""


@dataclass(frozen=True)
class AffineParams:
    """Scale and shift of one alignment: x -> scale * x + shift."""

    scale: float
    shift: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and np.isfinite(self.shift)):
            raise ValueError(f"affine params must be finite, got {self.scale}, {self.shift}")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "shift", float(self.shift))

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls(1.0, 0.0)


@dataclass(frozen=True)
class WindowPlan:
    """Schedule of overlapping windows covering a sequence of frame_count frames."""

    frame_count: int
    window_size: int
    stride: int
    starts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "starts", tuple(int(s) for s in self.starts))
        F, W = self.frame_count, self.window_size
        starts = self.starts
        if not starts or starts[0] != 0:
            raise ValueError("window plan must start at frame 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("window starts must be strictly increasing")
        if starts[-1] + W != F:
            raise ValueError("last window must end exactly at the sequence end")
        # Consecutive windows must share >= 1 frame, otherwise nothing to fit.
        if any(b >= a + W for a, b in zip(starts, starts[1:])):
            raise ValueError("consecutive windows must overlap by at least one frame")

    @property
    def overlap(self) -> int:
        """Overlap of interior window pairs (window_size - stride)."""
        return self.window_size - self.stride

    def window_count(self) -> int:
        return len(self.starts)


@dataclass(frozen=True)
class WindowPrediction:
    """One externally predicted depth window and where it sits in the video."""

    start: int
    depth: DepthSequence

    def __post_init__(self):
        if self.start < 0:
            raise ValueError(f"window start must be >= 0, got {self.start}")


@dataclass(frozen=True)
class WindowFit:
    """Record of one executed alignment, for job logs."""

    window_index: int
    start: int
    params: AffineParams
    fallback: bool


@dataclass(frozen=True)
class StitchResult:
    """Stitched sequence plus the per-window fit records.

    ``overlap_residuals`` (one flat array per fitted window, post-alignment
    aligned-minus-canvas over jointly valid overlap pixels) is populated
    only when requested; it feeds the residual-distribution analysis.
    """

    sequence: DepthSequence
    fits: tuple[WindowFit, ...]
    overlap_residuals: Optional[tuple[np.ndarray, ...]] = None


def plan_windows(frame_count: int, window_size: int, stride: int) -> WindowPlan:
    """Lay out window starts: 0, stride, 2*stride, ... with a final clamp.

    The last start is clamped to frame_count - window_size so the sequence
    end is always covered; a duplicate clamped start is suppressed.  A
    sequence shorter than the window becomes a single whole-sequence
    window.  stride >= window_size is rejected: without overlap there is
    nothing to align.
    """
    F, W, stride = int(frame_count), int(window_size), int(stride)
    if F < 1:
        raise ValueError(f"frame_count must be >= 1, got {F}")
    if W < 1:
        raise ValueError(f"window_size must be >= 1, got {W}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride >= W:
        raise ValueError(
            f"stride {stride} must be smaller than window_size {W}: "
            "consecutive windows need a nonempty overlap to align"
        )
    if F <= W:
        return WindowPlan(F, F, stride, (0,))
    starts = list(range(0, F - W + 1, stride))
    if starts[-1] != F - W:
        starts.append(F - W)
    return WindowPlan(F, W, stride, tuple(starts))


def fit_affine(overlap_a, overlap_b, valid=None) -> AffineParams:
    """Least-squares scale and shift mapping overlap_b onto overlap_a.

    Minimises ||s * b + t - a||^2 over the valid entries; the closed form
    is s = Cov(a, b) / Var(b), t = mean(a) - s * mean(b) with population
    moments.  Raises :class:`DegenerateOverlapError` when b is constant up
    to the relative variance floor (no scale is identifiable).
    """
    a = np.asarray(overlap_a, dtype=np.float64).ravel()
    b = np.asarray(overlap_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"overlap shapes differ: {a.shape} vs {b.shape}")
    if valid is None:
        mask = np.isfinite(a) & np.isfinite(b)
    else:
        mask = np.asarray(valid, dtype=bool).ravel()
        if mask.shape != a.shape:
            raise ValueError("valid mask does not match overlap shape")
    a, b = a[mask], b[mask]
    if a.size < 2:
        raise ValueError(f"affine fit needs >= 2 valid pixels, got {a.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("affine fit inputs must be finite on valid pixels")

    mu_a = a.mean()
    mu_b = b.mean()
    db = b - mu_b
    var_b = (db * db).mean()
    if var_b <= DEGENERACY_THRESHOLD * (np.abs(b).mean() ** 2):
        raise DegenerateOverlapError(
            f"overlap variance {var_b:.3e} is below the degeneracy threshold"
        )
    s = ((a - mu_a) * db).mean() / var_b
    if s == 0.0:
        raise DegenerateOverlapError("overlap carries no linear relation (zero covariance)")
    return AffineParams(s, mu_a - s * mu_b)


def apply_affine(window: DepthSequence, params: AffineParams) -> DepthSequence:
    """Map every valid pixel through x -> scale * x + shift; masks unchanged."""
    values = np.where(
        window.valid, params.scale * window.values + params.shift, window.values
    )
    return DepthSequence(values, window.valid)


def blend_overlap(
    prev_frames: Sequence[DepthMap], cur_frames: Sequence[DepthMap]
) -> list[DepthMap]:
    """Linearly interpolate overlap frames with the ramp w_i = (i+1)/(O+1).

    Frame i of the result is (1 - w_i) * prev + w_i * cur, so weight moves
    from the previous window toward the current one without ever hitting
    0 or 1 (no duplicated seam frame).  A pixel invalid in one source
    takes the other source's value; invalid in both stays invalid.
    """
    prev_frames = list(prev_frames)
    cur_frames = list(cur_frames)
    if len(prev_frames) != len(cur_frames):
        raise ValueError(
            f"overlap lengths differ: {len(prev_frames)} vs {len(cur_frames)}"
        )
    count = len(prev_frames)
    if count < 1:
        raise ValueError("blend_overlap needs at least one frame")
    out = []
    for i, (prev, cur) in enumerate(zip(prev_frames, cur_frames)):
        if prev.shape != cur.shape:
            raise ValueError(f"overlap frame {i} shapes differ: {prev.shape} vs {cur.shape}")
        w = (i + 1.0) / (count + 1.0)
        both = prev.valid & cur.valid
        values = np.full(prev.shape, np.nan)
        values[both] = (1.0 - w) * prev.values[both] + w * cur.values[both]
        only_prev = prev.valid & ~cur.valid
        values[only_prev] = prev.values[only_prev]
        only_cur = cur.valid & ~prev.valid
        values[only_cur] = cur.values[only_cur]
        out.append(DepthMap(values, prev.valid | cur.valid))
    return out


def _check_windows(windows: Sequence[WindowPrediction], plan: WindowPlan) -> tuple[int, int]:
    if len(windows) != plan.window_count():
        raise ValueError(
            f"plan expects {plan.window_count()} windows, got {len(windows)}"
        )
    shape = windows[0].depth.frame_shape
    for k, (win, start) in enumerate(zip(windows, plan.starts)):
        if win.start != start:
            raise ValueError(f"window {k} starts at {win.start}, plan says {start}")
        if win.depth.frame_count != plan.window_size:
            raise ValueError(
                f"window {k} has {win.depth.frame_count} frames, plan says {plan.window_size}"
            )
        if win.depth.frame_shape != shape:
            raise ValueError(
                f"window {k} frame shape {win.depth.frame_shape} differs from {shape}"
            )
    return shape


def stitch_sequence_detailed(
    windows: Sequence[WindowPrediction],
    plan: WindowPlan,
    collect_residuals: bool = False,
) -> StitchResult:
    """Stitch windows into one sequence; see module docstring for the chain.

    The first window is copied as-is (it defines the canonical scale) and
    contributes no fit record, so a single-window job reports zero fits.
    Overlaps whose joint valid/variance structure cannot support a fit fall
    back to identity parameters with a warning, recorded on the fit.
    """
    windows = list(windows)
    height, width = _check_windows(windows, plan)
    F, W = plan.frame_count, plan.window_size

    canvas = np.full((F, height, width), np.nan)
    canvas_valid = np.zeros((F, height, width), dtype=bool)
    first = windows[0].depth
    canvas[:W] = np.where(first.valid, first.values, np.nan)
    canvas_valid[:W] = first.valid
    covered = W

    fits: list[WindowFit] = []
    residuals: list[np.ndarray] = []
    for k in range(1, len(windows)):
        start = plan.starts[k]
        overlap = covered - start
        cur = windows[k].depth
        prev_vals = canvas[start:covered]
        prev_valid = canvas_valid[start:covered]
        joint = prev_valid & cur.valid[:overlap]

        fallback = False
        if joint.sum() < 2:
            params = AffineParams.identity()
            fallback = True
            warnings.warn(
                f"window {k} (start {start}): fewer than 2 jointly valid overlap "
                "pixels, falling back to identity alignment"
            )
        else:
            try:
                params = fit_affine(prev_vals, cur.values[:overlap], joint)
            except DegenerateOverlapError as exc:
                params = AffineParams.identity()
                fallback = True
                warnings.warn(
                    f"window {k} (start {start}): degenerate overlap ({exc}), "
                    "falling back to identity alignment"
                )
        aligned = apply_affine(cur, params)
        if collect_residuals and not fallback:
            residuals.append((aligned.values[:overlap] - prev_vals)[joint])

        prev_maps = [DepthMap(prev_vals[i], prev_valid[i]) for i in range(overlap)]
        cur_maps = [aligned.frame(i) for i in range(overlap)]
        for i, blended in enumerate(blend_overlap(prev_maps, cur_maps)):
            canvas[start + i] = np.where(blended.valid, blended.values, np.nan)
            canvas_valid[start + i] = blended.valid
        tail_end = start + W
        canvas[covered:tail_end] = np.where(
            aligned.valid[overlap:], aligned.values[overlap:], np.nan
        )
        canvas_valid[covered:tail_end] = aligned.valid[overlap:]
        covered = tail_end
        fits.append(WindowFit(k, start, params, fallback))

    if covered != F:
        raise RuntimeError(f"internal error: stitched {covered} of {F} frames")
    sequence = DepthSequence(canvas, canvas_valid)
    return StitchResult(sequence, tuple(fits), tuple(residuals) if collect_residuals else None)


def stitch_sequence(windows: Sequence[WindowPrediction], plan: WindowPlan) -> DepthSequence:
    """Stitch windows into one sequence of exactly plan.frame_count frames."""
    return stitch_sequence_detailed(windows, plan).sequence
