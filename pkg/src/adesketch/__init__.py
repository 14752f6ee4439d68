"""Adaptive-query-safe lp distance estimation via sketch ensembles."""

__version__ = "0.1.0"

from .core import (
    AdeParams,
    AdeStructure,
    QueryResult,
    build,
    derive_sizes,
    exact_distances,
    load_structure,
    query,
    query_repeated,
    representativeness_counts,
    robustify,
    save_structure,
)
from .errors import (
    CalibrationError,
    CapacityError,
    ChecksumError,
    IngestionError,
    StructureFormatError,
    VersionError,
)
from .estimator import AdaptiveDistanceEstimator
from .sketch import (
    GAUSSIAN,
    STABLE,
    SketchMatrix,
    SketchedVector,
    apply,
    apply_batch,
    estimate_l2,
    estimate_lp,
    frobenius,
    gen_sketch,
)
from .stable import (
    MedPTable,
    StableParams,
    med_p,
    sample_stable,
    sample_unit_directions,
    tail_survival_estimate,
)

__all__ = [
    "AdaptiveDistanceEstimator",
    "AdeParams",
    "AdeStructure",
    "CalibrationError",
    "CapacityError",
    "ChecksumError",
    "GAUSSIAN",
    "IngestionError",
    "MedPTable",
    "QueryResult",
    "STABLE",
    "SketchMatrix",
    "SketchedVector",
    "StableParams",
    "StructureFormatError",
    "VersionError",
    "apply",
    "apply_batch",
    "build",
    "derive_sizes",
    "estimate_l2",
    "estimate_lp",
    "exact_distances",
    "frobenius",
    "gen_sketch",
    "load_structure",
    "med_p",
    "query",
    "query_repeated",
    "representativeness_counts",
    "robustify",
    "sample_stable",
    "sample_unit_directions",
    "save_structure",
    "tail_survival_estimate",
]
