"""Regression smoothing on the unit simplex with Dirichlet kernel weights.

The package provides a local linear smoother (the intercept of a kernel
weighted least-squares plane fit) and the local constant Nadaraya-Watson
estimator, both weighted by a Dirichlet kernel whose parameters adapt to the
evaluation point.  On top of the estimators sit bandwidth selection (LSCV
against a known target, LOOCV for real data), closed-form asymptotic
bandwidth predictors, and a Monte Carlo harness that compares the two
estimators on a battery of test surfaces.

Hot loops run through numba-compiled kernels by default; set
``SIMPLEXSMOOTH_BACKEND=numpy`` to force the pure-numpy fallback.
"""

from ._version import __version__
from .backend import BACKEND, set_threads
from .kernels import (
    DirichletParams,
    as_simplex_point,
    as_simplex_points,
    a_b_asymptotic,
    a_b_closed_form,
    a_b_uniform_bound,
    boundary_variance_factor,
    exact_central_second_moment,
    exact_mean,
    kernel_params,
    kernel_weight,
    log_dirichlet_density,
    psi,
    sample_dirichlet,
    sample_uniform_simplex,
)
from .estimators import Dataset, LocalFit, NoSupportError, ll_fit, nw_estimate, predict_grid
from .bandwidth import (
    BandwidthSearch,
    SelectionResult,
    b_opt_global,
    b_opt_local,
    h_term,
    hessian_fd,
    loocv_score,
    loocv_select,
    lscv_score,
    lscv_select,
    mise_asymptotic,
    plug_in_global_bandwidth,
)
from .targets import TargetFunction, get_target, target_hessian, target_value
from .simulation import (
    ExperimentConfig,
    SimulationReport,
    emit_report,
    gen_responses,
    ise_boundary,
    ise_plain,
    ise_weighted,
    mesh,
    parse_report,
    run_experiment,
    sample_boundary_region,
    verify_first_order,
)


__all__ = [
    "BACKEND",
    "set_threads",
    "DirichletParams",
    "as_simplex_point",
    "as_simplex_points",
    "a_b_asymptotic",
    "a_b_closed_form",
    "a_b_uniform_bound",
    "boundary_variance_factor",
    "exact_central_second_moment",
    "exact_mean",
    "kernel_params",
    "kernel_weight",
    "log_dirichlet_density",
    "psi",
    "sample_dirichlet",
    "sample_uniform_simplex",
    "Dataset",
    "LocalFit",
    "NoSupportError",
    "ll_fit",
    "nw_estimate",
    "predict_grid",
    "BandwidthSearch",
    "SelectionResult",
    "b_opt_global",
    "b_opt_local",
    "h_term",
    "hessian_fd",
    "loocv_score",
    "loocv_select",
    "lscv_score",
    "lscv_select",
    "mise_asymptotic",
    "plug_in_global_bandwidth",
    "TargetFunction",
    "get_target",
    "target_hessian",
    "target_value",
    "ExperimentConfig",
    "SimulationReport",
    "emit_report",
    "gen_responses",
    "ise_boundary",
    "ise_plain",
    "ise_weighted",
    "mesh",
    "parse_report",
    "run_experiment",
    "sample_boundary_region",
    "verify_first_order",
    "__version__",
]
