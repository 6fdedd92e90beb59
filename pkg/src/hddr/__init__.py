"""Doubly robust score tests for exposure effects in high-dimensional GLMs.

Public surface: the data model (``Dataset``, ``LinkFunction``,
``WorkingModel``), the penalized regression engine, the nuisance
estimation strategies, the score test, the regression comparators, and the
Monte Carlo size-study harness.  The ``hddr`` command-line tool wraps the
batch workflows.
"""

from .comparators import ComparatorSpec, naive_post_selection_test, pds_cv_test
from .model_core import (Dataset, LinkFunction, WorkingModel, expit,
                         predict_mean, validate_dataset)
from .nuisance import (BrWeights, NuisanceFit, NuisanceMethod,
                       compute_br_weights, estimate_br_dr_binary,
                       estimate_br_dr_continuous, estimate_pmle_dr,
                       known_propensity_fit)
from .penalized_glm import (CvResult, LassoFit, cross_validate, cv_fit,
                            fit_lasso_linear, fit_lasso_logistic, kkt_check,
                            make_lambda_grid, refit_support, soft_threshold)
from .score_test import (TestResult, run_test, score_contributions,
                         test_statistic)
from .simulation import (DgpParams, MethodCell, SimReport, build_dgp_params,
                         generate_dataset, monte_carlo_type1,
                         reproduce_table1)

__version__ = "0.1.0"

__all__ = [
    "BrWeights",
    "ComparatorSpec",
    "CvResult",
    "Dataset",
    "DgpParams",
    "LassoFit",
    "LinkFunction",
    "MethodCell",
    "NuisanceFit",
    "NuisanceMethod",
    "SimReport",
    "TestResult",
    "WorkingModel",
    "build_dgp_params",
    "compute_br_weights",
    "cross_validate",
    "cv_fit",
    "estimate_br_dr_binary",
    "estimate_br_dr_continuous",
    "estimate_pmle_dr",
    "expit",
    "fit_lasso_linear",
    "fit_lasso_logistic",
    "generate_dataset",
    "kkt_check",
    "known_propensity_fit",
    "make_lambda_grid",
    "monte_carlo_type1",
    "naive_post_selection_test",
    "pds_cv_test",
    "predict_mean",
    "refit_support",
    "reproduce_table1",
    "run_test",
    "score_contributions",
    "soft_threshold",
    "test_statistic",
    "validate_dataset",
]
