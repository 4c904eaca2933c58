"""Affine processes on ``R_+^m x R^n`` and on the cone of positive semidefinite matrices."""

__version__ = "0.1.0"

from .errors import (
    AdmissibilityError,
    AffineError,
    ConfigurationError,
    DomainError,
    MomentDomainError,
    SchemaError,
    StiffnessError,
    StructureError,
    SupportError,
    UnsupportedParameterization,
)
from .expansion import DensityExpansion, build_expansion, evaluate_expansion, gram_matrix
from .jumps import GaussianRankOneJump, PointJump, RankOneJump, RayJump
from .martingale import MartingaleResult, martingale_check, tilt
from .models import (
    AdmissibilityReport,
    CanonicalAffineModel,
    WishartModel,
    cir,
    gaussian_ou,
    heston,
    infinitely_decomposable,
    validate,
    validate_canonical,
    validate_wishart,
)
from .moments import MomentOperator, generator_matrix, mean_and_variance, moments, multi_indices
from .riccati import RiccatiSolution, eval_exponents, explosion_time, exponents, solve, solve_batch
from .serialization import dump_model, load_model, loads_model, model_from_dict
from .simulate import (
    PathEnsemble,
    boundary_report,
    empirical_mgf,
    simulate_canonical,
    simulate_cir_exact,
    simulate_wishart,
)
from .transform import DensityWarning, TransformResult, charfn, decay_exponent, invert_density, mgf
from .wishart import WishartDistribution, laplace, psd_rank, transition_params, validate_params


def fixture_path(name):
    """Path of a bundled example model, e.g. ``fixture_path("cir")``."""
    from importlib.resources import files

    return str(files(__package__) / "fixtures" / f"{name}.json")


__all__ = [
    "AdmissibilityError",
    "AdmissibilityReport",
    "AffineError",
    "CanonicalAffineModel",
    "ConfigurationError",
    "DensityExpansion",
    "DensityWarning",
    "DomainError",
    "GaussianRankOneJump",
    "MartingaleResult",
    "MomentDomainError",
    "MomentOperator",
    "PathEnsemble",
    "PointJump",
    "RankOneJump",
    "RayJump",
    "RiccatiSolution",
    "SchemaError",
    "StiffnessError",
    "StructureError",
    "SupportError",
    "TransformResult",
    "UnsupportedParameterization",
    "WishartDistribution",
    "WishartModel",
    "__version__",
    "boundary_report",
    "build_expansion",
    "charfn",
    "cir",
    "decay_exponent",
    "dump_model",
    "empirical_mgf",
    "eval_exponents",
    "evaluate_expansion",
    "explosion_time",
    "exponents",
    "files",
    "fixture_path",
    "gaussian_ou",
    "generator_matrix",
    "gram_matrix",
    "heston",
    "infinitely_decomposable",
    "invert_density",
    "laplace",
    "load_model",
    "loads_model",
    "martingale_check",
    "mean_and_variance",
    "mgf",
    "model_from_dict",
    "moments",
    "multi_indices",
    "psd_rank",
    "simulate_canonical",
    "simulate_cir_exact",
    "simulate_wishart",
    "solve",
    "solve_batch",
    "tilt",
    "transition_params",
    "validate",
    "validate_canonical",
    "validate_params",
    "validate_wishart",
]
