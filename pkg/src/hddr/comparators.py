"""Baseline tests the size study compares against.

* Naive post-selection: CV'd L1 linear regression of the outcome on the
  exposure plus covariates (exposure penalty-free when "forced"), then an
  OLS refit on the selected columns and a classical t-test on the exposure
  coefficient.  The exposure always enters the refit so a t-statistic
  exists even when it was penalized away.
* Post-double selection with CV penalties: separate lasso selections for
  the outcome and exposure equations, OLS on the exposure plus the union
  of supports, heteroscedasticity-robust (HC1) z-test.

Both baselines select their penalties by the one-standard-error rule (the
convention of R's cv.glmnet coef/predict defaults), which is what standard
off-the-shelf post-selection workflows inherit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import SolverError, UnionTooLargeError
from .model_core import Dataset, LinkFunction, validate_dataset
from .penalized_glm import _greedy_keep, cv_fit
from .score_test import TestResult, normal_two_sided_p


@dataclass(frozen=True)
class ComparatorSpec:
    """Which comparator to run and with what resampling controls."""

    kind: str  # naive_forced | naive_unforced | pds_cv
    k_folds: int = 10
    seed: int = 1


def _seed_children(seed, n):
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    return ss.spawn(n)


def _ols_refit(design: np.ndarray, y: np.ndarray):
    """OLS with deterministic pruning of collinear columns (lowest index
    kept).  Returns (theta, kept_column_indices, XtX_inv_on_kept,
    residuals)."""
    n = design.shape[0]
    G = design.T @ design / n
    keep, _ = _greedy_keep(G)
    kept = np.asarray(keep, dtype=int)
    D = design[:, kept]
    XtX = D.T @ D
    XtX_inv = np.linalg.inv(XtX)
    theta = XtX_inv @ (D.T @ y)
    resid = y - D @ theta
    return theta, kept, XtX_inv, resid


def naive_post_selection_test(d: Dataset, forced: bool, k_folds: int = 10,
                              seed=1) -> TestResult:
    """Post-selection t-test: CV lasso of y on (a, L), OLS refit of y on a
    plus the selected covariates, classical t-test on a's coefficient with
    n - (model size) degrees of freedom."""
    validate_dataset(d, LinkFunction.IDENTITY, LinkFunction.IDENTITY)
    (cv_seed,) = _seed_children(seed, 1)
    n = d.n
    X_aug = np.column_stack([d.a, d.L])
    pf = np.ones(1 + d.p)
    if forced:
        pf[0] = 0.0
    cv, fit = cv_fit(X_aug, d.y, np.ones(n), LinkFunction.IDENTITY, k_folds,
                     cv_seed, penalty_factor=pf, rule="1se")
    support = fit.model.support
    selected_L = [int(j) - 1 for j in support if j != 0]
    exposure_selected = 0 in support

    # the refit always contains the exposure so the t-statistic exists
    design = np.column_stack([np.ones(n), d.a, d.L[:, selected_L]])
    theta, kept, XtX_inv, resid = _ols_refit(design, d.y)
    kept_list = list(kept)
    if 1 not in kept_list:
        raise SolverError("exposure column is collinear with the refit design")
    a_pos = kept_list.index(1)
    k_model = len(kept_list)
    dof = n - k_model
    if dof <= 0:
        raise SolverError("no residual degrees of freedom in the refit")
    sigma2 = float(resid @ resid) / dof
    se = float(np.sqrt(sigma2 * XtX_inv[a_pos, a_pos]))
    beta_a = float(theta[a_pos])
    t = beta_a / se
    p = float(2.0 * stats.t.sf(abs(t), dof))
    method = "naive_forced" if forced else "naive_unforced"
    return TestResult(
        t_n=t,
        p_value=p,
        n=n,
        score_mean=beta_a,
        score_sd=se * np.sqrt(n),
        method=method,
        diagnostics={
            "lambda": fit.lam,
            "lambda_rule": "1se",
            "selected_covariates": selected_L,
            "selected_size": len(selected_L),
            "exposure_selected": bool(exposure_selected),
            "dof": int(dof),
            "reference": f"t({dof})",
        },
    )


def pds_cv_test(d: Dataset, k_folds: int = 10, seed=1) -> TestResult:
    """Post-double selection with CV penalties and an HC1 sandwich z-test
    on the exposure coefficient."""
    validate_dataset(d, LinkFunction.LOGIT, LinkFunction.IDENTITY)
    outcome_seed, exposure_seed = _seed_children(seed, 2)
    n = d.n
    ones = np.ones(n)
    cv_b, fit_b = cv_fit(d.L, d.y, ones, LinkFunction.IDENTITY, k_folds,
                         outcome_seed, rule="1se")
    cv_g, fit_g = cv_fit(d.L, d.a, ones, LinkFunction.LOGIT, k_folds,
                         exposure_seed, rule="1se")
    s_beta = set(int(j) for j in fit_b.model.support)
    s_gamma = set(int(j) for j in fit_g.model.support)
    union = sorted(s_beta | s_gamma)
    if len(union) >= n - 2:
        raise UnionTooLargeError(
            f"selected union of {len(union)} covariates with n={n}")

    design = np.column_stack([np.ones(n), d.a, d.L[:, union]])
    theta, kept, XtX_inv, resid = _ols_refit(design, d.y)
    kept_list = list(kept)
    if 1 not in kept_list:
        raise SolverError("exposure column is collinear with the refit design")
    a_pos = kept_list.index(1)
    D = design[:, kept]
    k_model = len(kept_list)
    meat = (D * (resid ** 2)[:, None]).T @ D
    V = XtX_inv @ meat @ XtX_inv * (n / (n - k_model))
    se = float(np.sqrt(V[a_pos, a_pos]))
    beta_a = float(theta[a_pos])
    z = beta_a / se
    return TestResult(
        t_n=z,
        p_value=normal_two_sided_p(z),
        n=n,
        score_mean=beta_a,
        score_sd=se * np.sqrt(n),
        method="pds_cv",
        diagnostics={
            "lambda_beta": fit_b.lam,
            "lambda_gamma": fit_g.lam,
            "lambda_rule": "1se",
            "outcome_support": sorted(s_beta),
            "exposure_support": sorted(s_gamma),
            "union_support": union,
            "union_size": len(union),
            "reference": "normal (HC1 robust)",
        },
    )
