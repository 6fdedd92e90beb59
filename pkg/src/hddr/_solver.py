"""Numba kernels for weighted L1-penalized regression by coordinate descent.

The kernels minimize, over (intercept b0, coefficients beta):

  identity link:  (2n)^{-1} sum_i w_i (y_i - b0 - x_i'beta)^2
                      + lam * sum_j pf_j |beta_j|
  logit link:     n^{-1} sum_i w_i [log(1 + exp(b0 + x_i'beta))
                      - y_i (b0 + x_i'beta)] + lam * sum_j pf_j |beta_j|

The intercept is an unpenalized coordinate updated first in every sweep.
``pf`` is a per-coordinate penalty factor (1 everywhere except special
cases such as an unpenalized exposure column).  Columns with zero weighted
variance are left at exactly zero; the intercept absorbs their effect.

Convergence is declared only when a full sweep moves no coefficient by
more than ``tol`` on the standardized scale (changes are measured in units
of the column's weighted standard deviation) *and* the subgradient
stationarity residual is below ``kkt_tol``.

All kernels are deterministic (no fastmath, no threading) and cached.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Matches model_core.MEAN_CLIP; numba kernels cannot import it cheaply.
_CLIP = 1e-10


@njit(cache=True)
def _log1pexp(x):
    if x > 0.0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _col_stats(X, w):
    """Per-column (1/n) sum w x^2, weighted mean, weighted sd, and sum(w)."""
    n, p = X.shape
    sw = 0.0
    for i in range(n):
        sw += w[i]
    ajj = np.zeros(p)
    mu = np.zeros(p)
    scale = np.zeros(p)
    for j in range(p):
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            v = X[i, j]
            s1 += w[i] * v
            s2 += w[i] * v * v
        ajj[j] = s2 / n
        if sw > 0.0:
            m = s1 / sw
            var = s2 / sw - m * m
        else:
            m = 0.0
            var = 0.0
        if var < 0.0:
            var = 0.0
        mu[j] = m
        scale[j] = np.sqrt(var)
    return ajj, mu, scale, sw


@njit(cache=True)
def _degenerate_mask(ajj, scale):
    """ok[j] is False for columns with (numerically) zero weighted variance."""
    p = ajj.shape[0]
    ok = np.empty(p, np.bool_)
    for j in range(p):
        ok[j] = ajj[j] > 0.0 and scale[j] * scale[j] > 1e-12 * ajj[j]
    return ok


@njit(cache=True)
def _sync_residual(X, y, beta, b0, r):
    n, p = X.shape
    for i in range(n):
        r[i] = y[i] - b0
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * bj


@njit(cache=True)
def _sweep(X, r, w, lam, pf, beta, b0, ok, ajj, scale, sw, active_only):
    """One coordinate-descent pass (intercept first).  Returns the new
    intercept and the largest standardized coefficient change."""
    n, p = X.shape
    num = 0.0
    for i in range(n):
        num += w[i] * r[i]
    d0 = num / sw
    if d0 != 0.0:
        b0 += d0
        for i in range(n):
            r[i] -= d0
    maxchg = abs(d0)
    for j in range(p):
        if not ok[j]:
            continue
        bj = beta[j]
        if active_only and bj == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += w[i] * X[i, j] * r[i]
        g = g / n + ajj[j] * bj
        bnew = _soft(g, lam * pf[j]) / ajj[j]
        d = bnew - bj
        if d != 0.0:
            beta[j] = bnew
            for i in range(n):
                r[i] -= X[i, j] * d
            c = abs(d) * scale[j]
            if c > maxchg:
                maxchg = c
    return b0, maxchg


@njit(cache=True)
def _kkt_residual(X, r, w, lam, pf, beta):
    """Max subgradient stationarity residual of the weighted-LS objective,
    evaluated at the current residual r."""
    n, p = X.shape
    worst = 0.0
    for j in range(p):
        g = 0.0
        for i in range(n):
            g += w[i] * X[i, j] * r[i]
        g = -g / n  # gradient of the loss
        t = lam * pf[j]
        if beta[j] > 0.0:
            v = abs(g + t)
        elif beta[j] < 0.0:
            v = abs(g - t)
        else:
            v = abs(g) - t
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def _drop_dust(X, r, beta, scale):
    """Zero coefficients that are numerically indistinguishable from zero
    (standardized magnitude <= 1e-12), patching the residual.  Keeps
    supports free of accumulation dust without measurable effect on the
    objective or the stationarity residual."""
    n, p = X.shape
    for j in range(p):
        bj = beta[j]
        if bj != 0.0 and abs(bj) * scale[j] <= 1e-12:
            beta[j] = 0.0
            for i in range(n):
                r[i] += X[i, j] * bj


@njit(cache=True)
def _cd_wls(X, y, w, lam, pf, beta, b0, ok, ajj, scale, sw,
            tol, max_sweeps, kkt_tol, check_kkt):
    """Solve the weighted-LS lasso from a warm start.

    Returns (b0, sweeps_used, kkt, converged).  ``beta`` is updated in
    place.  When ``check_kkt`` is False (inner IRLS solves) the kkt value
    returned is -1 and convergence is on coefficient changes alone.
    """
    n, p = X.shape
    r = np.empty(n)
    _sync_residual(X, y, beta, b0, r)
    sweeps = 0
    cur_tol = tol
    converged = False
    kkt = -1.0
    while sweeps < max_sweeps:
        b0, chg = _sweep(X, r, w, lam, pf, beta, b0, ok, ajj, scale, sw, False)
        sweeps += 1
        if chg < cur_tol:
            _drop_dust(X, r, beta, scale)
            if not check_kkt:
                converged = True
                break
            kkt = _kkt_residual(X, r, w, lam, pf, beta)
            if kkt <= kkt_tol:
                converged = True
                break
            if cur_tol <= 1e-14:
                break
            cur_tol *= 0.25
            continue
        while sweeps < max_sweeps:
            b0, chg = _sweep(X, r, w, lam, pf, beta, b0, ok, ajj, scale, sw, True)
            sweeps += 1
            if chg < cur_tol:
                break
    if check_kkt and kkt < 0.0:
        _sync_residual(X, y, beta, b0, r)
        _drop_dust(X, r, beta, scale)
        kkt = _kkt_residual(X, r, w, lam, pf, beta)
        if kkt <= kkt_tol:
            converged = True
    return b0, sweeps, kkt, converged


@njit(cache=True)
def linear_lasso_path(X, y, w, grid, pf, tol, max_sweeps, kkt_tol,
                      check_kkt=True, warm_beta=None, warm_b0=0.0):
    """Warm-started weighted-LS lasso along a descending penalty grid.

    Returns (betas, intercepts, sweeps, kkts, converged) with one row per
    grid value.  ``check_kkt=False`` skips the stationarity verification
    (used for cross-validation fold fits, which are never returned).
    ``warm_beta``/``warm_b0`` seed the first grid entry.
    """
    n, p = X.shape
    nlam = grid.shape[0]
    betas = np.zeros((nlam, p))
    b0s = np.zeros(nlam)
    iters = np.zeros(nlam, np.int64)
    kkts = np.zeros(nlam)
    conv = np.zeros(nlam, np.bool_)

    ajj, mu, scale, sw = _col_stats(X, w)
    ok = _degenerate_mask(ajj, scale)
    beta = np.zeros(p)
    b0 = 0.0
    if sw > 0.0:
        s = 0.0
        for i in range(n):
            s += w[i] * y[i]
        b0 = s / sw
    if warm_beta is not None:
        for j in range(p):
            beta[j] = warm_beta[j]
        b0 = warm_b0
    for k in range(nlam):
        b0, sweeps, kkt, cflag = _cd_wls(
            X, y, w, grid[k], pf, beta, b0, ok, ajj, scale, sw,
            tol, max_sweeps, kkt_tol, check_kkt)
        betas[k] = beta
        b0s[k] = b0
        iters[k] = sweeps
        kkts[k] = kkt
        conv[k] = cflag
    return betas, b0s, iters, kkts, conv


@njit(cache=True)
def _logistic_fitted(X, beta, b0, eta, prob):
    n, p = X.shape
    for i in range(n):
        eta[i] = b0
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                eta[i] += X[i, j] * bj
    for i in range(n):
        e = eta[i]
        if e >= 0.0:
            z = np.exp(-e)
            pr = 1.0 / (1.0 + z)
        else:
            z = np.exp(e)
            pr = z / (1.0 + z)
        if pr < _CLIP:
            pr = _CLIP
        elif pr > 1.0 - _CLIP:
            pr = 1.0 - _CLIP
        prob[i] = pr


@njit(cache=True)
def _logistic_objective(eta, y, w, n):
    s = 0.0
    for i in range(n):
        s += w[i] * (_log1pexp(eta[i]) - y[i] * eta[i])
    return s / n


@njit(cache=True)
def _penalty_value(beta, pf, lam):
    s = 0.0
    for j in range(beta.shape[0]):
        s += pf[j] * abs(beta[j])
    return lam * s


@njit(cache=True)
def _kkt_logistic(X, y, w, prob, lam, pf, beta):
    n, p = X.shape
    worst = 0.0
    for j in range(p):
        g = 0.0
        for i in range(n):
            g += w[i] * X[i, j] * (prob[i] - y[i])
        g /= n
        t = lam * pf[j]
        if beta[j] > 0.0:
            v = abs(g + t)
        elif beta[j] < 0.0:
            v = abs(g - t)
        else:
            v = abs(g) - t
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def logistic_lasso_path(X, y, w, grid, pf, tol, max_sweeps, max_irls,
                        obj_tol, kkt_tol, check_kkt=True,
                        max_inner_sweeps=400, warm_beta=None, warm_b0=0.0):
    """Warm-started L1-penalized logistic path via IRLS with an inner
    coordinate-descent weighted-LS solve.

    Returns (betas, intercepts, total_inner_sweeps, kkts, converged).
    ``check_kkt=False`` declares convergence on the objective change alone.
    Each inner solve is capped at ``max_inner_sweeps``: precision beyond the
    IRLS quadratic approximation is wasted, and near-saturated fits (tiny
    penalties under separation) otherwise grind against ill-conditioned
    working weights.  Final convergence is still gated by the stationarity
    residual of the logistic objective itself.
    """
    n, p = X.shape
    nlam = grid.shape[0]
    betas = np.zeros((nlam, p))
    b0s = np.zeros(nlam)
    iters = np.zeros(nlam, np.int64)
    kkts = np.zeros(nlam)
    conv = np.zeros(nlam, np.bool_)

    # Standardized-scale change metric uses the observation weights, not
    # the IRLS weights, so the metric is stable across outer iterations.
    _, _, scale_w, sww = _col_stats(X, w)

    eta = np.empty(n)
    prob = np.empty(n)
    z = np.empty(n)
    omega = np.empty(n)

    beta = np.zeros(p)
    # Intercept-only start: weighted mean response through the logit.
    s = 0.0
    for i in range(n):
        s += w[i] * y[i]
    pbar = s / sww if sww > 0.0 else 0.5
    if pbar < _CLIP:
        pbar = _CLIP
    elif pbar > 1.0 - _CLIP:
        pbar = 1.0 - _CLIP
    b0 = np.log(pbar / (1.0 - pbar))
    if warm_beta is not None:
        for j in range(p):
            beta[j] = warm_beta[j]
        b0 = warm_b0

    beta_old = np.empty(p)
    inner_budget = max_inner_sweeps if max_inner_sweeps < max_sweeps \
        else max_sweeps
    # intercept-only deviance anchors the saturation guard below
    b0_null = np.log(pbar / (1.0 - pbar))
    dev_null = 0.0
    for i in range(n):
        dev_null += w[i] * (_log1pexp(b0_null) - y[i] * b0_null)
    dev_null /= n
    prev_ratio = -1.0
    for k in range(nlam):
        lam = grid[k]
        _logistic_fitted(X, beta, b0, eta, prob)
        obj = _logistic_objective(eta, y, w, n) + _penalty_value(beta, pf, lam)
        total_sweeps = 0
        cflag = False
        kkt = -1.0
        for _ in range(max_irls):
            for i in range(n):
                pq = prob[i] * (1.0 - prob[i])
                omega[i] = w[i] * pq
                z[i] = eta[i] + (y[i] - prob[i]) / pq
            ajj, mu, scale_o, swo = _col_stats(X, omega)
            ok = _degenerate_mask(ajj, scale_o)
            for j in range(p):
                beta_old[j] = beta[j]
            b0_old = b0
            b0, sweeps, _, _ = _cd_wls(
                X, z, omega, lam, pf, beta, b0, ok, ajj, scale_w, swo,
                tol, inner_budget, kkt_tol, False)
            total_sweeps += sweeps
            _logistic_fitted(X, beta, b0, eta, prob)
            new_obj = _logistic_objective(eta, y, w, n) + _penalty_value(beta, pf, lam)
            halvings = 0
            while new_obj > obj + 1e-12 and halvings < 10:
                for j in range(p):
                    beta[j] = 0.5 * (beta[j] + beta_old[j])
                b0 = 0.5 * (b0 + b0_old)
                _logistic_fitted(X, beta, b0, eta, prob)
                new_obj = (_logistic_objective(eta, y, w, n)
                           + _penalty_value(beta, pf, lam))
                halvings += 1
            moved = abs(new_obj - obj)
            obj = new_obj
            if moved < obj_tol:
                if not check_kkt:
                    cflag = True
                    break
                kkt = _kkt_logistic(X, y, w, prob, lam, pf, beta)
                if kkt <= kkt_tol:
                    cflag = True
                    break
        if check_kkt and kkt < 0.0:
            kkt = _kkt_logistic(X, y, w, prob, lam, pf, beta)
            if kkt <= kkt_tol:
                cflag = True
        betas[k] = beta
        b0s[k] = b0
        iters[k] = total_sweeps
        kkts[k] = kkt
        conv[k] = cflag
        # saturation guard: once the deviance is (nearly) fully explained,
        # or stops improving in the heavily-fit regime, smaller penalties
        # cannot change the fit materially; freeze the remaining entries
        if dev_null > 0.0 and k < nlam - 1:
            dev = obj - _penalty_value(beta, pf, lam)
            ratio = 1.0 - dev / dev_null
            stalled = (prev_ratio >= 0.0 and ratio > 0.5
                       and ratio - prev_ratio < 1e-5 * ratio)
            if ratio >= 0.999 or stalled:
                for k2 in range(k + 1, nlam):
                    betas[k2] = beta
                    b0s[k2] = b0
                    iters[k2] = 0
                    kkts[k2] = kkt
                    conv[k2] = cflag
                break
            prev_ratio = ratio
    return betas, b0s, iters, kkts, conv
