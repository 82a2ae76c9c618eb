"""Basis-function and correlation-matrix modeling of autocorrelated data.

The same autocorrelation structure can sit in the covariance of a model (a
correlation matrix built from a parametric family) or in its mean (a basis
expansion with random coefficients).  This package builds both forms,
converts between them, fits Gaussian mixed models with kriging-style
prediction, runs a Bayesian binary spatial regression, and ships the
diagnostics that make the basis form useful: residual autocorrelation and
basis/covariate collinearity.
"""

from .basis import (
    BasisExpansion,
    correlation_eigen_basis,
    eigen_basis,
    eigenvector_basis,
    equally_spaced_knots,
    gaussian_kernel_basis,
    gram,
    grouping_basis,
    polynomial_basis,
    predictive_process_basis,
    shifted_quadratic_basis,
    spread_knots,
    uniform_kernel_basis,
)
from .correlation import CorrelationModel, corr_matrix, corr_value, cross_corr_matrix
from .diagnostics import (
    DiagnosticsReport,
    collinearity_r2,
    diagnostics_report,
    max_pairwise_r2,
    residual_acf,
)
from .linalg import (
    EigenPair,
    RandomStream,
    SingularMatrixError,
    spd_factor,
    spd_solve,
    sym_eigen,
)
from .mixedlm import (
    ConvergenceError,
    LinearMixedModel,
    MixedModelFit,
    blup_alpha,
    blup_eta,
    fit_ml,
    marginal_nll,
    predict_mean,
    wald_interval,
)
from .probit import PosteriorSamples, SpatialProbit, gibbs_probit, posterior_predict
from .simulate import simulate_dataset
from .structures import (
    BasisStructure,
    CovarianceStructure,
    RandomStructure,
    build_structure,
    to_basis_form,
)

__version__ = "0.1.0"

__all__ = [
    "BasisExpansion",
    "BasisStructure",
    "ConvergenceError",
    "CorrelationModel",
    "CovarianceStructure",
    "DiagnosticsReport",
    "EigenPair",
    "LinearMixedModel",
    "MixedModelFit",
    "PosteriorSamples",
    "RandomStream",
    "RandomStructure",
    "SingularMatrixError",
    "SpatialProbit",
    "blup_alpha",
    "blup_eta",
    "build_structure",
    "collinearity_r2",
    "corr_matrix",
    "corr_value",
    "correlation_eigen_basis",
    "cross_corr_matrix",
    "diagnostics_report",
    "eigen_basis",
    "eigenvector_basis",
    "equally_spaced_knots",
    "fit_ml",
    "gaussian_kernel_basis",
    "gibbs_probit",
    "gram",
    "grouping_basis",
    "marginal_nll",
    "max_pairwise_r2",
    "polynomial_basis",
    "posterior_predict",
    "predict_mean",
    "predictive_process_basis",
    "residual_acf",
    "shifted_quadratic_basis",
    "simulate_dataset",
    "spd_factor",
    "spd_solve",
    "spread_knots",
    "sym_eigen",
    "to_basis_form",
    "uniform_kernel_basis",
    "wald_interval",
]
