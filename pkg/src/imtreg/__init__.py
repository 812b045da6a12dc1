"""Treatment-regime estimation from 2D imaging covariates.

Pipeline: triangulate the image domain, smooth images into a constrained
bivariate spline space, build data-driven orthonormal image bases from the
smoothed ensemble, regress outcomes on scalar covariates plus image scores,
and recommend the treatment with the larger fitted outcome.
"""

from .errors import (
    AllZeroSpectrum,
    DegeneratePolygon,
    DegenerateTriangle,
    ImtregError,
    InvalidConfig,
    MeshFailure,
    NonFiniteCovariance,
    PositivityViolation,
    RankDeficientSpace,
    SelectionFailure,
    SingularDesign,
    SpaceMismatch,
    UnderdeterminedFit,
    ZeroAssociation,
)
from .fpc import (
    FpcBasis,
    ScoreMatrix,
    SmoothedEnsemble,
    compute_fpc,
    scores,
    select_k_pave,
    select_k_pve,
    smooth_ensemble,
)
from .geometry import Triangulation, barycentric, build_triangulation
from .model import (
    BootstrapResult,
    Dataset,
    FittedModel,
    Recommendation,
    bootstrap_ci,
    fit,
    recommend,
    reconstruct_beta,
)
from .sim import (
    SimConfig,
    SimTruth,
    StudyReport,
    evaluate_value,
    generate,
    oracle_value,
    pixel_grid,
    run_study,
)
from .spline import (
    GridDesign,
    SplineFunction,
    SplineSpace,
    bernstein_eval,
    build_space,
    fit_image,
    fit_images,
    smoothness_constraints,
)

__version__ = "0.1.0"

__all__ = [
    "AllZeroSpectrum",
    "BootstrapResult",
    "Dataset",
    "DegeneratePolygon",
    "DegenerateTriangle",
    "FittedModel",
    "FpcBasis",
    "GridDesign",
    "ImtregError",
    "InvalidConfig",
    "MeshFailure",
    "NonFiniteCovariance",
    "PositivityViolation",
    "RankDeficientSpace",
    "Recommendation",
    "ScoreMatrix",
    "SelectionFailure",
    "SimConfig",
    "SimTruth",
    "SingularDesign",
    "SmoothedEnsemble",
    "SpaceMismatch",
    "SplineFunction",
    "SplineSpace",
    "StudyReport",
    "Triangulation",
    "UnderdeterminedFit",
    "ZeroAssociation",
    "barycentric",
    "bernstein_eval",
    "bootstrap_ci",
    "build_space",
    "build_triangulation",
    "compute_fpc",
    "evaluate_value",
    "fit",
    "fit_image",
    "fit_images",
    "generate",
    "oracle_value",
    "pixel_grid",
    "recommend",
    "reconstruct_beta",
    "run_study",
    "scores",
    "select_k_pave",
    "select_k_pve",
    "smooth_ensemble",
    "smoothness_constraints",
]
