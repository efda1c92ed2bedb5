"""Discrete calculus on Gaussian-kernel graphs and a manifold convergence lab."""

__version__ = "0.1.0"

from .calculus import (
    divergence,
    gradient,
    gradient_norm_at,
    inner_edge,
    inner_vertex,
    laplacian_apply,
    laplacian_matrix,
    normalized_laplacian_matrix,
)
from .convergence import (
    CellResult,
    DegreeCheckResult,
    ExperimentSpec,
    LemmaCheckResult,
    RateFit,
    SweepResult,
    degree_check,
    derive_cell_seed,
    estimator_spread_study,
    fit_rate,
    fit_rate_xy,
    lemma_check,
    sweep,
)
from .graph_core import (
    KernelConfig,
    PointCloud,
    WeightMatrix,
    build_weights,
    degrees,
    degrees_from_cloud,
)
from .manifolds import (
    MANIFOLDS,
    ManifoldDescriptor,
    TestFunction,
    eval_pair,
    get_manifold,
    grid_sample,
    manifold_names,
    sample,
)
from .verification import run_invariant_suite

__all__ = [
    "__version__",
    "PointCloud",
    "KernelConfig",
    "WeightMatrix",
    "build_weights",
    "degrees",
    "degrees_from_cloud",
    "gradient",
    "gradient_norm_at",
    "divergence",
    "laplacian_apply",
    "laplacian_matrix",
    "normalized_laplacian_matrix",
    "inner_vertex",
    "inner_edge",
    "MANIFOLDS",
    "ManifoldDescriptor",
    "TestFunction",
    "get_manifold",
    "manifold_names",
    "sample",
    "grid_sample",
    "eval_pair",
    "ExperimentSpec",
    "CellResult",
    "SweepResult",
    "LemmaCheckResult",
    "DegreeCheckResult",
    "RateFit",
    "lemma_check",
    "degree_check",
    "sweep",
    "fit_rate",
    "fit_rate_xy",
    "derive_cell_seed",
    "estimator_spread_study",
    "run_invariant_suite",
]
