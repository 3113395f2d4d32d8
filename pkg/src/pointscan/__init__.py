"""Point-cloud serialization scans, redundancy masking, and a toy reconstruction loop."""

__version__ = "0.1.0"

from .cloud import (
    EncoderWeights,
    PointCloud,
    TokenGroup,
    encode_tokens,
    farthest_point_sampling,
    knn_group,
    normalize_unit_sphere,
    token_features,
)
from .errors import EmptyInputError, ParseError, PointscanError, TrainingError, ValidationError
from .io import FORMATS, load_pointcloud
from .masking import (
    MaskConfig,
    MaskPlan,
    build_mask_plan,
    normalize_tokens,
    random_mask,
    redundancy_scores,
    similarity_matrix,
    sms_mask,
)
from .scan import (
    BASELINE_CURVES,
    CURVE_TAGS,
    PLANES,
    LocalityMetrics,
    ScanOrder,
    ScanParams,
    baseline_scan,
    hilbert_index,
    layer_partition,
    locality_metrics,
    morton_code,
    quantize_to_grid,
    zigzag_plane_scan,
    zigzag_scan_3d,
)
from .ssm import (
    DecoderWeights,
    ReconTask,
    SsmParams,
    TrainingTrace,
    chamfer_l2,
    reconstruct_train,
    reconstruction_grads,
    reconstruction_loss,
    ssm_forward,
    ssm_step,
)
from .synth import synthetic_batch, synthetic_cloud

__all__ = [
    "__version__",
    "BASELINE_CURVES",
    "CURVE_TAGS",
    "FORMATS",
    "PLANES",
    "DecoderWeights",
    "EmptyInputError",
    "EncoderWeights",
    "LocalityMetrics",
    "MaskConfig",
    "MaskPlan",
    "ParseError",
    "PointCloud",
    "PointscanError",
    "ReconTask",
    "ScanOrder",
    "ScanParams",
    "SsmParams",
    "TokenGroup",
    "TrainingError",
    "TrainingTrace",
    "ValidationError",
    "baseline_scan",
    "build_mask_plan",
    "chamfer_l2",
    "encode_tokens",
    "farthest_point_sampling",
    "hilbert_index",
    "knn_group",
    "layer_partition",
    "load_pointcloud",
    "locality_metrics",
    "morton_code",
    "normalize_tokens",
    "normalize_unit_sphere",
    "quantize_to_grid",
    "random_mask",
    "reconstruct_train",
    "reconstruction_grads",
    "reconstruction_loss",
    "redundancy_scores",
    "similarity_matrix",
    "sms_mask",
    "ssm_forward",
    "ssm_step",
    "synthetic_batch",
    "synthetic_cloud",
    "token_features",
    "zigzag_plane_scan",
    "zigzag_scan_3d",
]
