"""Weighted L1-penalized linear and logistic regression.

Coordinate descent (via the kernels in ``_solver``), regularization grids,
k-fold cross-validation, unpenalized post-selection refits, and subgradient
stationarity diagnostics.

Objectives (intercept b0 always unpenalized):

  identity:  (2n)^{-1} sum w_i (y_i - b0 - beta'L_i)^2 + lam ||beta||_1
  logit:     n^{-1} sum w_i [log(1+exp(b0 + beta'L_i)) - y_i (b0 + beta'L_i)]
                 + lam ||beta||_1

with an optional per-coordinate penalty factor replacing ||beta||_1 by
sum_j pf_j |beta_j|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import _solver
from .errors import FoldTooSmallError, SupportTooLargeError, ValidationError
from .model_core import (MEAN_CLIP, LinkFunction, WorkingModel, expit,
                         predict_mean)

# Solver defaults: coordinate descent stops when no coefficient moves more
# than COEF_TOL on the standardized scale in a full sweep; IRLS stops on an
# objective change below OBJ_TOL.  Fits report converged=True only when the
# stationarity residual is below KKT_TOL.
COEF_TOL = 1e-7
MAX_SWEEPS = 10_000
MAX_IRLS = 100
OBJ_TOL = 1e-8
KKT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LassoFit:
    """A solved penalized regression at one penalty value."""

    model: WorkingModel
    lam: float
    n_iter: int
    converged: bool
    kkt_violation: float
    penalty_factor: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class CvResult:
    """Cross-validation summary over a descending penalty grid.

    ``lambda_min`` minimizes the mean held-out loss (ties toward the larger
    penalty); ``lambda_1se`` is the largest penalty whose mean loss stays
    within one standard error of that minimum (the conventional
    sparser-model rule).  ``cv_se`` is the per-grid-point standard error of
    the mean loss across folds.
    """

    lambda_grid: np.ndarray
    mean_cv_loss: np.ndarray
    lambda_min: float
    fold_assignment: np.ndarray
    lambda_1se: float = float("nan")
    cv_se: np.ndarray | None = None


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ValidationError(f"threshold must be >= 0, got {t}")
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _as_fortran(L: np.ndarray) -> np.ndarray:
    return np.asfortranarray(np.asarray(L, dtype=float))


def _check_fit_inputs(L, y, obs_weights, lam, penalty_factor):
    L = _as_fortran(L)
    y = np.ascontiguousarray(y, dtype=float)
    w = np.ascontiguousarray(obs_weights, dtype=float)
    n, p = L.shape
    if y.shape[0] != n or w.shape[0] != n:
        raise ValidationError(
            f"length mismatch: L has {n} rows, y has {y.shape[0]}, "
            f"weights have {w.shape[0]}")
    if lam < 0:
        raise ValidationError(f"penalty must be >= 0, got {lam}")
    if np.any(w < 0):
        raise ValidationError("observation weights must be >= 0")
    if w.sum() <= 0:
        raise ValidationError("observation weights must not sum to zero")
    if penalty_factor is None:
        pf = np.ones(p)
    else:
        pf = np.ascontiguousarray(penalty_factor, dtype=float)
        if pf.shape[0] != p:
            raise ValidationError("penalty_factor length must equal n columns")
        if np.any(pf < 0):
            raise ValidationError("penalty factors must be >= 0")
    return L, y, w, pf


def fit_lasso_linear(L, y, obs_weights, lam, penalty_factor=None, *,
                     tol=COEF_TOL, max_sweeps=MAX_SWEEPS) -> LassoFit:
    """Weighted linear lasso by coordinate descent.

    Columns with zero weighted variance are left at exactly zero.
    Non-convergence is reported through ``converged=False``, never raised.
    """
    L, y, w, pf = _check_fit_inputs(L, y, obs_weights, lam, penalty_factor)
    grid = np.array([float(lam)])
    betas, b0s, iters, kkts, conv = _solver.linear_lasso_path(
        L, y, w, grid, pf, tol, max_sweeps, KKT_TOL)
    model = WorkingModel(LinkFunction.IDENTITY, b0s[0], betas[0])
    return LassoFit(model, float(lam), int(iters[0]), bool(conv[0]),
                    float(kkts[0]), pf)


def fit_lasso_logistic(L, y, obs_weights, lam, penalty_factor=None, *,
                       tol=COEF_TOL, max_sweeps=MAX_SWEEPS,
                       max_irls=MAX_IRLS) -> LassoFit:
    """Weighted L1-penalized logistic regression via IRLS with an inner
    coordinate-descent solve.  Deterministic given inputs; separation is
    absorbed by mean clipping, so a fit is always returned."""
    L, y, w, pf = _check_fit_inputs(L, y, obs_weights, lam, penalty_factor)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("logistic fit requires a 0/1 response")
    grid = np.array([float(lam)])
    betas, b0s, iters, kkts, conv = _solver.logistic_lasso_path(
        L, y, w, grid, pf, tol, max_sweeps, max_irls, OBJ_TOL, KKT_TOL)
    model = WorkingModel(LinkFunction.LOGIT, b0s[0], betas[0])
    return LassoFit(model, float(lam), int(iters[0]), bool(conv[0]),
                    float(kkts[0]), pf)


def _null_model_gradient(L, y, w, link, pf):
    """Gradient of the unpenalized loss at the null model (all penalized
    coefficients zero; intercept and any unpenalized coordinates fit)."""
    n = L.shape[0]
    free = np.flatnonzero(pf == 0.0)
    if free.size == 0:
        ybar = float(np.average(y, weights=w))
        if link is LinkFunction.LOGIT:
            fitted = np.full(n, np.clip(ybar, MEAN_CLIP, 1 - MEAN_CLIP))
        else:
            fitted = np.full(n, ybar)
    else:
        model = refit_support(L, y, w, link, free)
        fitted = predict_mean(model, L)
    resid = y - fitted
    return (L * w[:, None]).T @ resid / n


def make_lambda_grid(L, y, obs_weights, link, n_lambda=100, ratio=None,
                     penalty_factor=None) -> np.ndarray:
    """Descending log-spaced penalty grid from lambda_max (smallest penalty
    with empty support, from the stationarity condition at the null model)
    down to ratio * lambda_max.

    ``ratio`` defaults to 0.01 when p >= n, else 1e-4.  A grid of [0.0] is
    returned when the null-model gradient vanishes entirely.
    """
    L, y, w, pf = _check_fit_inputs(L, y, obs_weights, 0.0, penalty_factor)
    n, p = L.shape
    if n_lambda < 2:
        raise ValidationError(f"n_lambda must be >= 2, got {n_lambda}")
    if ratio is None:
        ratio = 0.01 if p >= n else 1e-4
    if not 0 < ratio < 1:
        raise ValidationError(f"ratio must be in (0, 1), got {ratio}")
    g = _null_model_gradient(L, y, w, link, pf)
    penalized = pf > 0
    if not penalized.any():
        return np.array([0.0])
    lam_max = float(np.max(np.abs(g[penalized]) / pf[penalized]))
    if lam_max <= 0.0:
        return np.array([0.0])
    grid = np.exp(np.linspace(np.log(lam_max), np.log(ratio * lam_max),
                              n_lambda))
    grid[0] = lam_max  # exact, so the first fit has empty support
    return grid


def _assign_folds(n: int, k: int, seed) -> np.ndarray:
    if k < 2:
        raise FoldTooSmallError(f"need at least 2 folds, got {k}")
    if k > n:
        raise FoldTooSmallError(f"{k} folds for {n} observations leaves "
                                "empty folds")
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(ss))
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k
    return assignment


# Fold fits are internal (their coefficients are never returned): they run
# at a looser tolerance without stationarity verification and under hard
# iteration budgets.  In the deep-overfitting tail of the penalty grid
# (quasi-separated logistic fits) extra iterations change the held-out
# loss immaterially while costing thousands of sweeps per grid point.
FOLD_TOL = 1e-5
FOLD_OBJ_TOL = 1e-7
FOLD_MAX_IRLS = 8
FOLD_MAX_INNER = 100


def _fit_path(L, y, w, grid, pf, link, tol=COEF_TOL, max_sweeps=MAX_SWEEPS,
              obj_tol=OBJ_TOL, check_kkt=True, warm=None, max_irls=MAX_IRLS,
              max_inner=400):
    warm_beta, warm_b0 = (None, 0.0) if warm is None else warm
    if link is LinkFunction.LOGIT:
        return _solver.logistic_lasso_path(
            L, y, w, grid, pf, tol, max_sweeps, max_irls, obj_tol, KKT_TOL,
            check_kkt, max_inner, warm_beta, warm_b0)
    return _solver.linear_lasso_path(L, y, w, grid, pf, tol, max_sweeps,
                                     KKT_TOL, check_kkt, warm_beta, warm_b0)


def _heldout_loss(link, y, eta, w):
    """Weighted held-out loss per grid point: MSE for identity, mean
    binomial deviance for logit.  ``eta`` has shape (n_held, n_lambda)."""
    sw = w.sum()
    if sw <= 0.0:  # fold carries no weight: contributes nothing
        return np.zeros(eta.shape[1])
    if link is LinkFunction.LOGIT:
        dev = 2.0 * (np.logaddexp(0.0, eta) - y[:, None] * eta)
        return (w[:, None] * dev).sum(axis=0) / sw
    err = (y[:, None] - eta) ** 2
    return (w[:, None] * err).sum(axis=0) / sw


def cross_validate(L, y, obs_weights, link, k, grid, seed,
                   penalty_factor=None, fold_tol=FOLD_TOL) -> CvResult:
    """k-fold cross-validation over a descending penalty grid.

    Folds come from a seeded permutation with sizes differing by at most
    one.  The held-out loss is weighted by the same observation weights as
    the fit.  Ties in the mean loss break toward the larger penalty.
    ``fold_tol`` controls the coordinate-descent tolerance of the internal
    fold fits only.
    """
    L, y, w, pf = _check_fit_inputs(L, y, obs_weights, 0.0, penalty_factor)
    grid = np.ascontiguousarray(grid, dtype=float)
    n = L.shape[0]
    assignment = _assign_folds(n, k, seed)
    fold_losses = np.empty((k, grid.shape[0]))
    for f in range(k):
        held = assignment == f
        train = ~held
        Ltr = np.asfortranarray(L[train])
        betas, b0s, _, _, _ = _fit_path(Ltr, y[train], w[train], grid, pf,
                                        link, tol=fold_tol,
                                        obj_tol=FOLD_OBJ_TOL, check_kkt=False,
                                        max_irls=FOLD_MAX_IRLS,
                                        max_inner=FOLD_MAX_INNER)
        eta = L[held] @ betas.T + b0s[None, :]
        fold_losses[f] = _heldout_loss(link, y[held], eta, w[held])
    mean_loss = fold_losses.mean(axis=0)
    cv_se = fold_losses.std(axis=0, ddof=1) / np.sqrt(k)
    imin = int(np.argmin(mean_loss))
    lambda_min = float(grid[imin])
    within = np.flatnonzero(mean_loss <= mean_loss[imin] + cv_se[imin])
    lambda_1se = float(grid[int(within[0])])
    return CvResult(grid, mean_loss, lambda_min, assignment, lambda_1se,
                    cv_se)


def cv_fit(L, y, obs_weights, link, k, seed, n_lambda=100, ratio=None,
           penalty_factor=None, fold_tol=FOLD_TOL,
           rule: str = "min") -> tuple[CvResult, LassoFit]:
    """Convenience: build a grid, cross-validate, and fit the full data at
    the selected penalty (warm-started along the path).  ``rule`` picks the
    penalty: the loss minimizer ("min") or the one-standard-error rule
    ("1se")."""
    if rule not in ("min", "1se"):
        raise ValidationError(f"rule must be 'min' or '1se', got {rule!r}")
    Lf = _as_fortran(L)
    grid = make_lambda_grid(Lf, y, obs_weights, link, n_lambda=n_lambda,
                            ratio=ratio, penalty_factor=penalty_factor)
    if grid.shape[0] == 1:
        cv = CvResult(grid, np.zeros(1), float(grid[0]),
                      _assign_folds(Lf.shape[0], k, seed), float(grid[0]),
                      np.zeros(1))
    else:
        cv = cross_validate(Lf, y, obs_weights, link, k, grid, seed,
                            penalty_factor=penalty_factor, fold_tol=fold_tol)
    _, yv, wv, pf = _check_fit_inputs(Lf, y, obs_weights, 0.0, penalty_factor)
    lam_target = cv.lambda_min if rule == "min" else cv.lambda_1se
    upto = int(np.flatnonzero(grid == lam_target)[0]) + 1
    # cheap warm traversal down the path, then one tight verified fit at
    # the selected penalty
    warm = None
    n_warm = 0
    if upto > 1:
        betas, b0s, iters, _, _ = _fit_path(
            Lf, yv, wv, grid[:upto - 1], pf, link, tol=fold_tol,
            obj_tol=FOLD_OBJ_TOL, check_kkt=False, max_irls=FOLD_MAX_IRLS,
            max_inner=FOLD_MAX_INNER)
        warm = (betas[-1], float(b0s[-1]))
        n_warm = int(iters.sum())
    betas, b0s, iters, kkts, conv = _fit_path(
        Lf, yv, wv, grid[upto - 1:upto], pf, link, warm=warm)
    link_out = link if isinstance(link, LinkFunction) else LinkFunction(link)
    model = WorkingModel(link_out, b0s[0], betas[0])
    fit = LassoFit(model, float(grid[upto - 1]), n_warm + int(iters[0]),
                   bool(conv[0]), float(kkts[0]), pf)
    return cv, fit


def _greedy_keep(G: np.ndarray, rel_tol: float = 1e-10):
    """Greedy Cholesky column selection: walk columns in order, keeping a
    column only if it is numerically independent of those already kept
    (lowest index wins)."""
    m = G.shape[0]
    keep: list[int] = []
    Lf = np.zeros((m, m))
    for j in range(m):
        d = G[j, j]
        if d <= 0.0:
            continue
        r = len(keep)
        if r == 0:
            keep.append(j)
            Lf[0, 0] = np.sqrt(d)
            continue
        g = G[np.asarray(keep), j]
        v = solve_triangular(Lf[:r, :r], g, lower=True)
        s = d - v @ v
        if s > rel_tol * d:
            Lf[r, :r] = v
            Lf[r, r] = np.sqrt(s)
            keep.append(j)
    return keep, Lf[:len(keep), :len(keep)]


def refit_support(L, y, obs_weights, link, support) -> WorkingModel:
    """Unpenalized (weighted) least squares or logistic MLE on the given
    support columns plus an intercept.

    Collinear columns are dropped deterministically (lowest index kept) and
    recorded on the returned model; coefficients outside the support are
    exactly zero.
    """
    L, y, w, _ = _check_fit_inputs(L, y, obs_weights, 0.0, None)
    n, p = L.shape
    support = np.asarray(sorted(int(j) for j in np.asarray(support, dtype=int)),
                         dtype=np.int64)
    if support.size and (support.min() < 0 or support.max() >= p):
        raise ValidationError("support indices out of range")
    if support.size >= n:
        raise SupportTooLargeError(
            f"support of size {support.size} with only {n} observations")

    D = np.column_stack([np.ones(n), L[:, support]])
    G = (D * w[:, None]).T @ D / n
    keep, Lchol = _greedy_keep(G)
    assert keep and keep[0] == 0  # w sums to > 0, so the intercept is kept
    kept_cols = np.asarray(keep, dtype=int)
    dropped = tuple(int(support[j - 1]) for j in range(1, support.size + 1)
                    if j not in keep)
    Dk = D[:, kept_cols]

    if link is LinkFunction.LOGIT:
        theta = _logistic_mle(Dk, y, w)
    else:
        b = (Dk * w[:, None]).T @ y / n
        theta = cho_solve((Lchol, True), b)

    coef = np.zeros(p)
    for pos, j in enumerate(kept_cols[1:], start=1):
        coef[support[j - 1]] = theta[pos]
    return WorkingModel(link, float(theta[0]), coef, dropped=dropped)


def _logistic_mle(D, y, w, max_iter=MAX_IRLS, tol=1e-10):
    """Newton/IRLS for the weighted logistic MLE on a full-rank design.
    Separation stalls against the mean clip and the iteration cap; the
    latest iterate is returned."""
    n, m = D.shape
    theta = np.zeros(m)
    pbar = np.clip(np.average(y, weights=w), MEAN_CLIP, 1 - MEAN_CLIP)
    theta[0] = np.log(pbar / (1 - pbar))
    eta = D @ theta
    prob = np.clip(expit(eta), MEAN_CLIP, 1 - MEAN_CLIP)
    dev = np.average(np.logaddexp(0.0, eta) - y * eta, weights=w)
    for _ in range(max_iter):
        omega = w * prob * (1 - prob)
        G = (D * omega[:, None]).T @ D / n
        grad = D.T @ (w * (y - prob)) / n
        try:
            step = np.linalg.solve(G, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(G, grad, rcond=None)[0]
        new_theta = theta + step
        for _ in range(30):
            eta = D @ new_theta
            new_dev = np.average(np.logaddexp(0.0, eta) - y * eta, weights=w)
            if new_dev <= dev + 1e-12:
                break
            step *= 0.5
            new_theta = theta + step
        moved = np.max(np.abs(new_theta - theta))
        theta = new_theta
        prob = np.clip(expit(eta), MEAN_CLIP, 1 - MEAN_CLIP)
        if abs(new_dev - dev) < tol and moved < 1e-8:
            dev = new_dev
            break
        dev = new_dev
    return theta


def kkt_check(fit: LassoFit, L, y, obs_weights, link) -> float:
    """Max subgradient stationarity residual of the penalized objective at
    the fit: max over coordinates of |g_j + lam*pf_j*sign(b_j)| on the
    support and max(|g_j| - lam*pf_j, 0) off it, where g is the gradient of
    the unpenalized loss."""
    L, y, w, _ = _check_fit_inputs(L, y, obs_weights, 0.0, None)
    n = L.shape[0]
    pf = fit.penalty_factor if fit.penalty_factor is not None \
        else np.ones(L.shape[1])
    from .model_core import predict_mean

    fitted = predict_mean(fit.model, L)
    if link is LinkFunction.LOGIT:
        g = (L * w[:, None]).T @ (fitted - y) / n
    else:
        g = -(L * w[:, None]).T @ (y - fitted) / n
    coef = fit.model.coef
    t = fit.lam * pf
    on = coef != 0
    resid_on = np.abs(g[on] + t[on] * np.sign(coef[on]))
    resid_off = np.maximum(np.abs(g[~on]) - t[~on], 0.0)
    worst = 0.0
    if resid_on.size:
        worst = max(worst, float(resid_on.max()))
    if resid_off.size:
        worst = max(worst, float(resid_off.max()))
    return worst
