"""Core containers for depth maps, depth videos, and latent videos.

All containers normalise their payload to float64, copy it out of the
caller's buffer, and freeze it (numpy writeable flag cleared).  Validity
is carried as an explicit boolean mask alongside the values so that file
sentinels (NaN, zero pixels) never leak into arithmetic downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "DepthMap",
    "DepthSequence",
    "LatentSequence",
    "spatial_differentials",
    "temporal_differentials",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_float64(values, name: str, rank: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != rank:
        raise ValueError(f"{name} must be {rank}-dimensional, got shape {arr.shape}")
    if any(s < 1 for s in arr.shape):
        raise ValueError(f"{name} has an empty dimension: shape {arr.shape}")
    return arr


def _as_mask(valid, values: np.ndarray, name: str) -> np.ndarray:
    if valid is None:
        return np.isfinite(values)
    mask = np.array(valid, dtype=bool, copy=True)
    if mask.shape != values.shape:
        raise ValueError(
            f"{name} valid mask shape {mask.shape} does not match values shape {values.shape}"
        )
    return mask


@dataclass(frozen=True)
class DepthMap:
    """A single depth frame: float64 values plus a per-pixel validity mask.

    Values must be finite wherever ``valid`` is True.  When ``valid`` is
    omitted it defaults to the finite entries of ``values``, so NaN is the
    in-memory invalid sentinel.
    """

    values: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _as_float64(self.values, "DepthMap.values", 2)
        mask = _as_mask(self.valid, values, "DepthMap")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("DepthMap has non-finite values marked valid")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "valid", _freeze(mask))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_count(self) -> int:
        return int(self.valid.sum())


@dataclass(frozen=True)
class DepthSequence:
    """A depth video of shape (frames, height, width) with a matching mask."""

    values: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _as_float64(self.values, "DepthSequence.values", 3)
        mask = _as_mask(self.valid, values, "DepthSequence")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("DepthSequence has non-finite values marked valid")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "valid", _freeze(mask))

    @classmethod
    def from_frames(cls, frames: Iterable[DepthMap]) -> "DepthSequence":
        frames = list(frames)
        if not frames:
            raise ValueError("cannot build a DepthSequence from zero frames")
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise ValueError(f"frames disagree on shape: {sorted(shapes)}")
        values = np.stack([f.values for f in frames])
        valid = np.stack([f.valid for f in frames])
        return cls(values, valid)

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    def frame(self, index: int) -> DepthMap:
        return DepthMap(self.values[index], self.valid[index])

    def frames(self) -> list[DepthMap]:
        return [self.frame(i) for i in range(self.frame_count)]


@dataclass(frozen=True)
class LatentSequence:
    """A dense latent video of shape (frames, channels, height, width).

    Latents are always fully observed, so there is no validity mask; all
    entries must be finite.
    """

    values: np.ndarray

    def __post_init__(self):
        values = _as_float64(self.values, "LatentSequence.values", 4)
        if not np.all(np.isfinite(values)):
            raise ValueError("LatentSequence values must be finite")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.values.shape


def spatial_differentials(latents: LatentSequence) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences along height and width for every frame and channel.

    Returns ``(d_h, d_w)`` with shapes (f, c, h-1, w) and (f, c, h, w-1).
    A singleton spatial axis yields an empty differential along it.
    """
    v = latents.values
    return np.diff(v, axis=2), np.diff(v, axis=3)


def temporal_differentials(latents: LatentSequence) -> np.ndarray:
    """Forward differences along the frame axis, shape (f-1, c, h, w).

    A single-frame sequence yields an empty differential.
    """
    return np.diff(latents.values, axis=0)
