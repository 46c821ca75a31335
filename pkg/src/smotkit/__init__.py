"""smotkit: evaluation metrics, synthetic data, and a reference tracker
for multi-object tracking of small objects."""

from .data_io import (
    AffineTransform,
    Detection,
    SequencePair,
    build_pairs,
    load_affines,
    load_mot_sequences,
    parse_coco_vid,
    parse_mot,
    write_mot,
)
from .errors import PairingError, SmotError, ValidationError
from .fusion import adaptive_wbf_weights, intersection_ensemble, interpolate_tracks, wbf
from .geometry import (
    BoundingBox,
    center_distance,
    diou,
    dotd,
    expanded_penalty_similarity,
    iou,
    mean_object_size,
)
from .matching import (
    DEFAULT_ALPHAS,
    MEASURES,
    accumulate,
    association_potential,
    brute_force_match,
    match_frame,
    similarity_matrix,
)
from .metrics import (
    MetricReport,
    clear_metrics,
    evaluate_sequences,
    hota_suite,
    idf1,
    pool,
    so_hota_suite,
)
from .synth import (
    CorruptionConfig,
    DisplacementStudyConfig,
    SceneConfig,
    corrupt,
    displacement_study,
    generate_scene,
)
from .tracker import Tracker, TrackerConfig

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "BoundingBox",
    "CorruptionConfig",
    "DEFAULT_ALPHAS",
    "Detection",
    "DisplacementStudyConfig",
    "MEASURES",
    "MetricReport",
    "PairingError",
    "SceneConfig",
    "SequencePair",
    "SmotError",
    "Tracker",
    "TrackerConfig",
    "ValidationError",
    "accumulate",
    "adaptive_wbf_weights",
    "association_potential",
    "brute_force_match",
    "build_pairs",
    "center_distance",
    "clear_metrics",
    "corrupt",
    "diou",
    "displacement_study",
    "dotd",
    "evaluate_sequences",
    "expanded_penalty_similarity",
    "generate_scene",
    "hota_suite",
    "idf1",
    "intersection_ensemble",
    "interpolate_tracks",
    "iou",
    "load_affines",
    "load_mot_sequences",
    "match_frame",
    "mean_object_size",
    "parse_coco_vid",
    "parse_mot",
    "pool",
    "similarity_matrix",
    "so_hota_suite",
    "wbf",
    "write_mot",
]
