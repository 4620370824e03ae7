"""Synthetic scenes, per-window affine corruption, and the ablation harness.

The generator builds smooth deterministic depth videos (a planar ramp plus
drifting Gaussian blobs, analytically bounded inside the configured depth
range).  The corruption model applies an independent random scale/shift
per window plus optional pixel noise: the minimal simulation of windowed
predictions that agree only up to a global affine.  On top of both sits
the overlap-size ablation harness and a brute-force alignment oracle that
cross-checks the closed-form fit by direct residual minimisation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .metrics import abs_rel, delta1
from .stitching import (
    AffineParams,
    WindowPlan,
    WindowPrediction,
    apply_affine,
    fit_affine,
    plan_windows,
    stitch_sequence,
)
from .tensors import DepthSequence

__all__ = [
    "SceneConfig",
    "CorruptionConfig",
    "AblationRecord",
    "AblationSummary",
    "AblationResult",
    "generate_scene",
    "corrupt_windows",
    "grid_search_alignment",
    "global_alignment_oracle",
    "run_overlap_ablation",
]

BLOB_COUNT = 6


@dataclass(frozen=True)
class SceneConfig:
    """Deterministic synthetic scene: size, motion, and depth range."""

    seed: int = 0
    frames: int = 90
    height: int = 64
    width: int = 64
    motion_amplitude: float = 1.0
    near: float = 1.0
    far: float = 10.0

    def __post_init__(self):
        if self.frames < 1 or self.height < 1 or self.width < 1:
            raise ValueError("frames, height, and width must all be >= 1")
        if not (np.isfinite(self.near) and self.near > 0):
            raise ValueError(f"near plane must be positive, got {self.near}")
        if not (np.isfinite(self.far) and self.far > self.near):
            raise ValueError(f"far plane must exceed near, got {self.near}..{self.far}")
        if not (np.isfinite(self.motion_amplitude) and self.motion_amplitude >= 0):
            raise ValueError(f"motion amplitude must be >= 0, got {self.motion_amplitude}")


@dataclass(frozen=True)
class CorruptionConfig:
    """Per-window affine drift ranges and additive pixel noise."""

    s_lo: float = 0.9
    s_hi: float = 1.1
    t_lo: float = -1.0
    t_hi: float = 1.0
    sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.s_lo) and self.s_lo > 0):
            raise ValueError(f"scale range must be positive, got s_lo={self.s_lo}")
        if not (np.isfinite(self.s_hi) and self.s_hi >= self.s_lo):
            raise ValueError(f"scale range is empty: [{self.s_lo}, {self.s_hi}]")
        if not (np.isfinite(self.t_lo) and np.isfinite(self.t_hi) and self.t_hi >= self.t_lo):
            raise ValueError(f"shift range is empty: [{self.t_lo}, {self.t_hi}]")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")


def generate_scene(cfg: SceneConfig) -> DepthSequence:
    """Deterministic smooth depth video, all values strictly inside (near, far).

    A fixed planar ramp carries the scene; BLOB_COUNT Gaussian blobs travel
    along seeded sinusoidal paths scaled by the motion amplitude.  The raw
    field is bounded analytically (ramp in [0, 1], each blob in [0, w_k]),
    so mapping into the depth range needs no clamping and stays smooth.
    Equal configs produce bit-identical sequences.
    """
    rng = np.random.default_rng(cfg.seed)
    F, H, W = cfg.frames, cfg.height, cfg.width
    yy = np.linspace(0.0, 1.0, H)[:, None]
    xx = np.linspace(0.0, 1.0, W)[None, :]
    ramp = 0.6 * yy + 0.4 * xx  # in [0, 1]

    raw = np.empty((F, H, W))
    raw[:] = ramp
    bound = 1.0
    fphase = np.arange(F) / max(F, 2)
    for _ in range(BLOB_COUNT):
        c0 = rng.uniform(0.15, 0.85, size=2)
        travel = rng.uniform(0.05, 0.2) * cfg.motion_amplitude
        direction = rng.uniform(0.0, 2.0 * np.pi)
        freq = rng.integers(1, 3)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        sigma = rng.uniform(0.08, 0.2)
        weight = rng.uniform(0.3, 1.0)

        swing = np.sin(2.0 * np.pi * freq * fphase + phase)
        cy = c0[0] + travel * np.cos(direction) * swing
        cx = c0[1] + travel * np.sin(direction) * swing
        d2 = (yy[None, :, :] - cy[:, None, None]) ** 2 + (
            xx[None, :, :] - cx[:, None, None]
        ) ** 2
        raw += weight * np.exp(-d2 / (2.0 * sigma * sigma))
        bound += weight

    margin = 0.05 * (cfg.far - cfg.near)
    span = (cfg.far - cfg.near) - 2.0 * margin
    depth = cfg.near + margin + span * (raw / bound)
    return DepthSequence(depth, np.ones(depth.shape, dtype=bool))


def corrupt_windows(
    gt: DepthSequence, plan: WindowPlan, cfg: CorruptionConfig
) -> list[WindowPrediction]:
    """Cut ground truth into plan windows and corrupt each one.

    Window k becomes s_k * gt_slice + t_k + noise with (s_k, t_k) drawn
    uniformly from the configured ranges and noise i.i.d. Gaussian of the
    configured sigma (the noise draw is skipped entirely when sigma is 0).
    Draws happen window by window in plan order, so the stream is
    reproducible from the seed alone.
    """
    if plan.frame_count != gt.frame_count:
        raise ValueError(
            f"plan covers {plan.frame_count} frames, sequence has {gt.frame_count}"
        )
    rng = np.random.default_rng(cfg.seed)
    windows = []
    for start in plan.starts:
        stop = start + plan.window_size
        s = rng.uniform(cfg.s_lo, cfg.s_hi)
        t = rng.uniform(cfg.t_lo, cfg.t_hi)
        values = s * gt.values[start:stop] + t
        if cfg.sigma > 0:
            values = values + rng.normal(0.0, cfg.sigma, size=values.shape)
        windows.append(WindowPrediction(start, DepthSequence(values, gt.valid[start:stop])))
    return windows


# ---------------------------------------------------------------------------
# brute-force alignment oracle


def _masked_pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    joint = pred.valid & gt.valid
    if not joint.any():
        raise ValueError("no jointly valid pixels to align")
    return gt.values[joint], pred.values[joint]


def grid_search_alignment(
    a, b, valid=None, levels: int = 16, points: int = 41
) -> AffineParams:
    """Minimise ||s * b + t - a||^2 by coarse-to-fine grid search.

    Deliberately shares no code with the closed-form fit: every candidate
    (s, t) is scored by directly evaluating the residual sum of squares,
    and the grid shrinks around the best candidate each level.  The
    initial box is wide enough to contain the optimum (|s*| is bounded by
    std(a)/std(b) via Cauchy-Schwarz) and the final spacing sits far below
    1e-9 relative, so this serves as an independent oracle for the closed
    form.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"overlap shapes differ: {a.shape} vs {b.shape}")
    if valid is not None:
        mask = np.asarray(valid, dtype=bool).ravel()
        a, b = a[mask], b[mask]
    if a.size < 2:
        raise ValueError("grid search needs >= 2 samples")
    std_a = a.std()
    std_b = b.std()
    if std_b == 0.0:
        raise ValueError("grid search cannot align against a constant signal")

    s_center = 0.0
    s_span = 4.0 * (std_a / std_b) + 1e-9
    t_center = a.mean()
    t_span = 4.0 * (std_a + abs(a.mean()) + (s_span * (abs(b.mean()) + std_b))) + 1e-9

    best_s, best_t = s_center, t_center
    for _ in range(levels):
        S = np.linspace(s_center - s_span, s_center + s_span, points)
        T = np.linspace(t_center - t_span, t_center + t_span, points)
        best_rss = np.inf
        for s in S:
            r0 = s * b - a
            rss_row = ((r0[None, :] + T[:, None]) ** 2).sum(axis=1)
            j = int(np.argmin(rss_row))
            if rss_row[j] < best_rss:
                best_rss = rss_row[j]
                best_s, best_t = float(s), float(T[j])
        s_center, t_center = best_s, best_t
        # Keep the optimum inside the next box: it lies within one grid
        # cell of the best candidate, and the new span covers two.
        s_span = 4.0 * (S[1] - S[0])
        t_span = 4.0 * (T[1] - T[0])
        if s_span < 1e-13 * max(1.0, abs(s_center)) and t_span < 1e-13 * max(
            1.0, abs(t_center)
        ):
            break
    return AffineParams(best_s, best_t)


def global_alignment_oracle(
    pred: DepthSequence, gt: DepthSequence, verify: bool = True
) -> AffineParams:
    """Whole-sequence least-squares alignment of pred onto gt.

    Returns the closed-form fit over all jointly valid pixels.  With
    ``verify`` on, the closed form is first cross-checked against the
    grid-search oracle on a deterministic subsample (both routes see the
    same data); disagreement beyond 1e-6 relative raises RuntimeError.
    """
    a, b = _masked_pair(pred, gt)
    params = fit_affine(a, b)
    if verify:
        step = max(1, a.size // 20000)
        a_sub, b_sub = a[::step], b[::step]
        sub = fit_affine(a_sub, b_sub)
        grid = grid_search_alignment(a_sub, b_sub)
        s_err = abs(grid.scale - sub.scale) / max(1.0, abs(sub.scale))
        t_err = abs(grid.shift - sub.shift) / max(1.0, abs(sub.shift))
        if s_err > 1e-6 or t_err > 1e-6:
            raise RuntimeError(
                "closed-form alignment disagrees with the grid-search oracle: "
                f"({sub.scale}, {sub.shift}) vs ({grid.scale}, {grid.shift})"
            )
    return params


# ---------------------------------------------------------------------------
# overlap-size ablation harness


@dataclass(frozen=True)
class AblationRecord:
    """One stitched run: overlap size, seed, metrics, stitch wall time."""

    overlap: int
    seed: int
    abs_rel: float
    delta1: float
    wall_ms: float


@dataclass(frozen=True)
class AblationSummary:
    """Per-overlap aggregate over seeds."""

    overlap: int
    mean_abs_rel: float
    sem_abs_rel: float
    mean_delta1: float
    mean_wall_ms: float
    rel_runtime: float


@dataclass(frozen=True)
class AblationResult:
    records: tuple[AblationRecord, ...]
    summaries: tuple[AblationSummary, ...]


def run_overlap_ablation(
    scene: SceneConfig,
    corruption: CorruptionConfig,
    overlaps,
    seeds: int,
    window_size: int = 45,
) -> AblationResult:
    """Sweep overlap sizes: corrupt, stitch, oracle-align, and score.

    For each overlap O the plan uses stride = window_size - O.  Each seed
    offsets the corruption seed, so runs are independent but reproducible.
    Wall time covers stitch_sequence only (the component under test);
    rel_runtime in the summaries is mean wall time relative to the
    smallest overlap.
    """
    overlaps = [int(o) for o in overlaps]
    if not overlaps:
        raise ValueError("need at least one overlap size")
    if len(set(overlaps)) != len(overlaps):
        raise ValueError("overlap sizes must be distinct")
    for o in overlaps:
        if o < 1 or o >= window_size:
            raise ValueError(f"overlap {o} must satisfy 1 <= O < window_size {window_size}")
    if seeds < 1:
        raise ValueError("need at least one seed")

    gt = generate_scene(scene)
    records = []
    for o in overlaps:
        plan = plan_windows(gt.frame_count, window_size, window_size - o)
        for i in range(seeds):
            cfg_i = replace(corruption, seed=corruption.seed + i)
            windows = corrupt_windows(gt, plan, cfg_i)
            t0 = time.perf_counter()
            stitched = stitch_sequence(windows, plan)
            wall_ms = (time.perf_counter() - t0) * 1000.0
            params = global_alignment_oracle(stitched, gt, verify=False)
            aligned = apply_affine(stitched, params)
            records.append(
                AblationRecord(o, cfg_i.seed, abs_rel(aligned, gt), delta1(aligned, gt), wall_ms)
            )

    base_overlap = min(overlaps)
    mean_wall = {}
    summaries = []
    for o in overlaps:
        runs = [r for r in records if r.overlap == o]
        rels = np.array([r.abs_rel for r in runs])
        sem = float(rels.std(ddof=1) / np.sqrt(len(rels))) if len(rels) > 1 else 0.0
        mean_wall[o] = float(np.mean([r.wall_ms for r in runs]))
        summaries.append(
            (o, float(rels.mean()), sem, float(np.mean([r.delta1 for r in runs])), mean_wall[o])
        )
    base = mean_wall[base_overlap]
    summaries = tuple(
        AblationSummary(o, m, sem, d1, w, w / base) for (o, m, sem, d1, w) in summaries
    )
    return AblationResult(tuple(records), summaries)
