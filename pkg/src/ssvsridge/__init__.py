"""Stochastic search variable selection for probit mixed models.

Ridge-augmented g-prior over active coefficients, integrated-likelihood
Metropolis updates for the inclusion vector, a Bayesian lasso baseline,
and post-processing for selection stability and predictive refits.
"""

from .blasso import LassoConfig, LassoHyper, LassoOutput, run_lasso_chain
from .distributions import (
    RngStream,
    SingularMatrixError,
    sample_inverse_gamma,
    sample_inverse_gaussian,
    sample_mvn,
    sample_truncated_normal,
    spd_factorize,
)
from .estimators import BayesianLassoSelector, ProbitMixedClassifier, SsvsSelector
from .model import (
    CalibrationError,
    Dataset,
    GammaVector,
    RidgeHyper,
    calibrate_tau,
    default_lambda,
    log_acceptance_ratio,
    log_integrated_gamma_density,
)
from .postprocess import (
    RefitConfig,
    SelectionResult,
    cw_rel,
    final_selection,
    full_rank_submatrix,
    lasso_select,
    refit_and_predict,
)
from .simdata import SimSpec, base_only, generate_microarray_analog, generate_simulated
from .ssvs import ChainOutput, SsvsConfig, run_ssvs_chain

__version__ = "0.1.0"

__all__ = [
    "BayesianLassoSelector",
    "CalibrationError",
    "ChainOutput",
    "Dataset",
    "GammaVector",
    "LassoConfig",
    "LassoHyper",
    "LassoOutput",
    "ProbitMixedClassifier",
    "RefitConfig",
    "RidgeHyper",
    "RngStream",
    "SelectionResult",
    "SimSpec",
    "SingularMatrixError",
    "SsvsConfig",
    "SsvsSelector",
    "base_only",
    "calibrate_tau",
    "cw_rel",
    "default_lambda",
    "final_selection",
    "full_rank_submatrix",
    "generate_microarray_analog",
    "generate_simulated",
    "lasso_select",
    "log_acceptance_ratio",
    "log_integrated_gamma_density",
    "refit_and_predict",
    "run_lasso_chain",
    "run_ssvs_chain",
    "sample_inverse_gamma",
    "sample_inverse_gaussian",
    "sample_mvn",
    "sample_truncated_normal",
    "spd_factorize",
    "__version__",
]
