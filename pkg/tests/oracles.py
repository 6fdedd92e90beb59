"""Independent reference implementations used only by the test suite.

These deliberately avoid the package's coordinate-descent path: the lasso
oracle is an accelerated proximal-gradient (FISTA) solver on the same
objectives, refits are checked against raw normal equations, and losses are
recomputed from first principles.
"""

from __future__ import annotations

import numpy as np


def _expit(t):
    z = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def fista_lasso(X, y, w, lam, link="identity", penalty_factor=None,
                max_iter=500_000, tol=1e-12):
    """Proximal-gradient minimizer of

        identity: (2n)^-1 sum w (y - b0 - Xb)^2 + lam * sum pf_j |b_j|
        logit:    n^-1 sum w [log(1+exp(b0+Xb)) - y (b0+Xb)] + lam * ...

    with an unpenalized intercept.  Returns (intercept, coef).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    pf = np.ones(p) if penalty_factor is None else np.asarray(penalty_factor,
                                                              dtype=float)
    D = np.column_stack([np.ones(n), X])
    H = (D * w[:, None]).T @ D / n
    lip = np.linalg.eigvalsh(H).max()
    if link == "logit":
        lip *= 0.25
    lip = max(lip, 1e-12)

    theta = np.zeros(p + 1)
    zv = theta.copy()
    tk = 1.0
    for _ in range(max_iter):
        eta = D @ zv
        if link == "logit":
            grad = D.T @ (w * (_expit(eta) - y)) / n
        else:
            grad = -(D * w[:, None]).T @ (y - eta) / n
        cand = zv - grad / lip
        thr = lam * pf / lip
        cand[1:] = np.sign(cand[1:]) * np.maximum(np.abs(cand[1:]) - thr, 0.0)
        tk2 = (1.0 + np.sqrt(1.0 + 4.0 * tk * tk)) / 2.0
        zv = cand + (tk - 1.0) / tk2 * (cand - theta)
        moved = np.max(np.abs(cand - theta))
        theta, tk = cand, tk2
        if moved < tol:
            break
    return float(theta[0]), theta[1:]


def wls_normal_equations(X, y, w):
    """Weighted least squares (intercept + all columns) via the raw normal
    equations.  Assumes a full-rank design."""
    n = X.shape[0]
    D = np.column_stack([np.ones(n), X])
    G = (D * w[:, None]).T @ D
    b = (D * w[:, None]).T @ y
    theta = np.linalg.solve(G, b)
    return float(theta[0]), theta[1:]


def penalized_objective(X, y, w, lam, intercept, coef, link="identity",
                        penalty_factor=None):
    """Value of the penalized objective at the given coefficients."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    pf = np.ones(X.shape[1]) if penalty_factor is None \
        else np.asarray(penalty_factor, dtype=float)
    eta = intercept + X @ coef
    if link == "logit":
        loss = np.sum(w * (np.logaddexp(0.0, eta) - y * eta)) / n
    else:
        loss = np.sum(w * (y - eta) ** 2) / (2 * n)
    return loss + lam * np.sum(pf * np.abs(coef))
