"""Deterministic post-processing toolkit for video depth maps.

The pieces, bottom up: tensor containers and depth-map codecs, sinusoidal
timestep embeddings, differential-matching losses with verified gradients,
closed-form affine stitching of overlapping windows, affine-invariant
evaluation metrics, and a synthetic benchmark that exercises the whole
chain.  Everything is pure float64 numpy: equal inputs give bit-equal
outputs.
"""

__version__ = "0.1.0"

from .tensors import (
    DepthMap,
    DepthSequence,
    LatentSequence,
    spatial_differentials,
    temporal_differentials,
)
from .formats import (
    DEPTH_FORMATS,
    FormatError,
    RAW_MAGIC,
    TensorFileHeader,
    read_depth_map,
    read_raw_tensor,
    write_depth_map,
    write_raw_tensor,
)
from .embedding import (
    ANCHOR_TIMESTEP,
    AnchorEmbedding,
    EmbeddingConfig,
    embedding_similarity_matrix,
    similarity_matrix_csv,
    sinusoidal_embedding,
)
from .losses import (
    LossReport,
    LossWeights,
    finite_difference_check,
    joint_objective,
    spatial_rectification_loss,
    temporal_rectification_loss,
    video_objective,
)
from .stitching import (
    AffineParams,
    DegenerateOverlapError,
    StitchResult,
    WindowFit,
    WindowPlan,
    WindowPrediction,
    apply_affine,
    blend_overlap,
    fit_affine,
    plan_windows,
    stitch_sequence,
    stitch_sequence_detailed,
)
from .metrics import (
    DEFAULT_BOUNDARY_THRESHOLDS,
    MetricDomainError,
    MetricReport,
    abs_rel,
    align_for_eval,
    boundary_prf,
    delta1,
    evaluate_sequence,
)
from .synthetic import (
    AblationRecord,
    AblationResult,
    AblationSummary,
    CorruptionConfig,
    SceneConfig,
    corrupt_windows,
    generate_scene,
    global_alignment_oracle,
    grid_search_alignment,
    run_overlap_ablation,
)

__all__ = [
    "__version__",
    "DepthMap",
    "DepthSequence",
    "LatentSequence",
    "spatial_differentials",
    "temporal_differentials",
    "DEPTH_FORMATS",
    "FormatError",
    "RAW_MAGIC",
    "TensorFileHeader",
    "read_depth_map",
    "read_raw_tensor",
    "write_depth_map",
    "write_raw_tensor",
    "ANCHOR_TIMESTEP",
    "AnchorEmbedding",
    "EmbeddingConfig",
    "embedding_similarity_matrix",
    "similarity_matrix_csv",
    "sinusoidal_embedding",
    "LossReport",
    "LossWeights",
    "finite_difference_check",
    "joint_objective",
    "spatial_rectification_loss",
    "temporal_rectification_loss",
    "video_objective",
    "AffineParams",
    "DegenerateOverlapError",
    "StitchResult",
    "WindowFit",
    "WindowPlan",
    "WindowPrediction",
    "apply_affine",
    "blend_overlap",
    "fit_affine",
    "plan_windows",
    "stitch_sequence",
    "stitch_sequence_detailed",
    "DEFAULT_BOUNDARY_THRESHOLDS",
    "MetricDomainError",
    "MetricReport",
    "abs_rel",
    "align_for_eval",
    "boundary_prf",
    "delta1",
    "evaluate_sequence",
    "AblationRecord",
    "AblationResult",
    "AblationSummary",
    "CorruptionConfig",
    "SceneConfig",
    "corrupt_windows",
    "generate_scene",
    "global_alignment_oracle",
    "grid_search_alignment",
    "run_overlap_ablation",
]
