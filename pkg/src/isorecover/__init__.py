"""Recover a global Euclidean isometry from data that preserves distances
almost everywhere, and certify how much of the data it explains."""

from .errors import (
    DegenerateAnchors,
    DegenerateSimplex,
    DegenerateSupport,
    DimensionError,
    Infeasible,
    InsufficientData,
    NoConsensus,
    NotDistancePreserving,
    NumericalFailure,
    RecoveryError,
)
from .geometry import (
    affine_dimension,
    affinely_independent,
    distance,
    gram_matrix,
    inner_by_polarization,
    inner_product,
    polarization_rows,
)
from .isometry import EuclideanIsometry, random_isometry
from .extension import (
    check_distance_preserving,
    extend_finite_isometry,
    verify_gram_equality,
)
from .trilateration import equidistance_collapse, locate
from .measures import (
    CorrespondenceSet,
    CorruptedMap,
    MeasureModel,
    apply_corrupted,
    check_full_dimensional,
    make_correspondences,
    sample,
)
from .certifier import (
    CertificationReport,
    RecoveryConfig,
    certify,
    procrustes_fit,
    recover_oracle,
    recover_robust,
    select_simplex,
    verify_pointwise,
    wilson_interval,
)

__version__ = "0.1.0"
