"""Sinusoidal timestep embeddings and their similarity structure.

A scalar timestep t in [0, 1] is mapped to a vector of paired cosines and
sines over a geometric frequency ladder:

    v = [cos(w_1 S t), ..., cos(w_{d/2} S t), sin(w_1 S t), ..., sin(w_{d/2} S t)]

with w_i = base ** (-2 (i - 1) / d) and S a time scale applied before the
trigonometry (t in [0, 1] times S = 1000 lands on the integer-like range
diffusion backbones condition on).  Each (cos, sin) pair lies on the unit
circle, so the vector norm is exactly sqrt(d / 2) and cosine similarity
between two timesteps is a mean of cosines of frequency-scaled deltas.

``ANCHOR_TIMESTEP`` is the fixed conditioning timestep the rest of the
pipeline assumes: mid-range, far enough from both ends to trade stability
against detail.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ANCHOR_TIMESTEP",
    "EmbeddingConfig",
    "AnchorEmbedding",
    "sinusoidal_embedding",
    "embedding_similarity_matrix",
    "similarity_matrix_csv",
]

ANCHOR_TIMESTEP = 0.5


@dataclass(frozen=True)
class EmbeddingConfig:
    """Shape of the sinusoidal embedding: dimension, frequency base, time scale."""

    dim: int = 256
    base: float = 10000.0
    time_scale: float = 1000.0

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2 != 0:
            raise ValueError(f"embedding dim must be an even integer >= 2, got {self.dim}")
        if not np.isfinite(self.base) or self.base <= 1.0:
            raise ValueError(f"embedding base must be finite and > 1, got {self.base}")
        if not np.isfinite(self.time_scale) or self.time_scale <= 0:
            raise ValueError(
                f"embedding time scale must be positive and finite, got {self.time_scale}"
            )

    def frequencies(self) -> np.ndarray:
        """The geometric ladder w_i = base ** (-2 (i - 1) / dim), i = 1..dim/2."""
        i = np.arange(self.dim // 2, dtype=np.float64)
        return np.power(self.base, -2.0 * i / self.dim)


def _check_timestep(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0.0 or t > 1.0:
        raise ValueError(f"timestep must lie in [0, 1], got {t}")
    return t


def _embedding_vector(t: float, config: EmbeddingConfig) -> np.ndarray:
    phase = config.frequencies() * (config.time_scale * t)
    return np.concatenate([np.cos(phase), np.sin(phase)])


@dataclass(frozen=True)
class AnchorEmbedding:
    """A timestep together with its embedding vector.

    Construction verifies the unit-circle invariant of every (cos, sin)
    pair, which also pins the vector norm to sqrt(dim / 2).
    """

    timestep: float
    vector: np.ndarray

    def __post_init__(self):
        t = _check_timestep(self.timestep)
        vec = np.array(self.vector, dtype=np.float64, copy=True)
        if vec.ndim != 1 or vec.size < 2 or vec.size % 2 != 0:
            raise ValueError(f"embedding vector must be 1-D with even length, got {vec.shape}")
        half = vec.size // 2
        radii = vec[:half] ** 2 + vec[half:] ** 2
        err = np.abs(radii - 1.0).max()
        if err > 1e-12:
            raise ValueError(f"embedding pairs leave the unit circle by {err:.3e}")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "timestep", t)

    @property
    def dim(self) -> int:
        return self.vector.size


def sinusoidal_embedding(
    timestep: float, config: EmbeddingConfig = EmbeddingConfig()
) -> AnchorEmbedding:
    """Embed one timestep in [0, 1]; the vector has length config.dim."""
    t = _check_timestep(timestep)
    return AnchorEmbedding(t, _embedding_vector(t, config))


def embedding_similarity_matrix(
    timesteps, config: EmbeddingConfig = EmbeddingConfig()
) -> np.ndarray:
    """Pairwise cosine similarity of the embeddings of the given timesteps.

    The result is explicitly symmetrised and has an exact unit diagonal.
    """
    ts = [_check_timestep(t) for t in timesteps]
    if not ts:
        raise ValueError("timesteps must be a non-empty collection")
    vectors = np.stack([_embedding_vector(t, config) for t in ts])
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        # Unreachable for a cos/sin basis; guards against config corruption.
        raise RuntimeError("internal error: zero-norm embedding vector")
    unit = vectors / norms
    sim = unit @ unit.T
    sim = 0.5 * (sim + sim.T)
    np.fill_diagonal(sim, 1.0)
    return sim


def similarity_matrix_csv(timesteps, config: EmbeddingConfig = EmbeddingConfig()) -> str:
    """Render the similarity matrix as CSV, one row per timestep.

    The header row carries the timesteps; the first column repeats them so
    the table reads the same along both axes.  Values use 9 significant
    digits.
    """
    ts = [float(t) for t in timesteps]
    sim = embedding_similarity_matrix(ts, config)
    buf = io.StringIO()
    buf.write("t," + ",".join("%.9g" % t for t in ts) + "\n")
    for t, row in zip(ts, sim):
        buf.write("%.9g," % t + ",".join("%.9g" % x for x in row) + "\n")
    return buf.getvalue()
