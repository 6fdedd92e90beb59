"""Probe: 400-rep Type I error for br_dr track/weight variants + pmle."""
import sys
import time

import numpy as np

from hddr.model_core import LinkFunction
from hddr.nuisance import NuisanceFit, NuisanceMethod, compute_br_weights
from hddr.penalized_glm import cv_fit, refit_support
from hddr.score_test import score_contributions, test_statistic
from hddr.simulation import build_dgp_params, generate_dataset, monte_carlo_type1

IDENT = LinkFunction.IDENTITY
LOGIT = LinkFunction.LOGIT
params = build_dgp_params(200, 200)
REPS = 400


def br_variant(d, seed, refit_weights, track):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_exp, s_out = ss.spawn(2)
    ones = np.ones(d.n)
    cv_g, fit_g = cv_fit(d.L, d.a, ones, LOGIT, 10, s_exp)
    gam_refit = refit_support(d.L, d.a, ones, LOGIT, fit_g.model.support)
    w_pen = compute_br_weights(fit_g.model, d.L).w
    cv_b, fit_b = cv_fit(d.L, d.y, w_pen, IDENT, 10, s_out)
    if track == "penalized":
        exposure, outcome = fit_g.model, fit_b.model
    else:
        w_refit = w_pen if refit_weights == "penalized" else compute_br_weights(gam_refit, d.L).w
        beta_refit = refit_support(d.L, d.y, w_refit, IDENT, fit_b.model.support)
        exposure, outcome = gam_refit, beta_refit
    fit = NuisanceFit(exposure_model=exposure, outcome_model=outcome,
                      method=NuisanceMethod.BR_DR, lambda_gamma=cv_g.lambda_min,
                      lambda_beta=cv_b.lambda_min, refitted=track == "refit")
    U = score_contributions(d, fit)
    return test_statistic(U).p_value


def mc(tag, fn):
    t0 = time.time()
    rej = 0
    for r in range(REPS):
        ss = np.random.SeedSequence(entropy=1, spawn_key=(r,))
        d_seed, m_seed = ss.spawn(2)
        d = generate_dataset(params, d_seed)
        if fn(d, m_seed) <= 0.05:
            rej += 1
    rate = rej / REPS
    print(f"{tag}: {rate:.4f} (se {np.sqrt(rate*(1-rate)/REPS):.4f}) [{time.time()-t0:.0f}s]",
          flush=True)


which = sys.argv[1]
if which == "brA":
    mc("br refit-track, weights from penalized gamma (current)",
       lambda d, s: br_variant(d, s, "penalized", "refit"))
elif which == "brB":
    mc("br refit-track, weights from refitted gamma",
       lambda d, s: br_variant(d, s, "refit", "refit"))
elif which == "brC":
    mc("br penalized-track statistic (no refits)",
       lambda d, s: br_variant(d, s, None, "penalized"))
elif which == "pmle":
    t0 = time.time()
    cell = monte_carlo_type1("pmle_dr", params, reps=REPS, alpha=0.05,
                             master_seed=1, workers=2)
    print(f"pmle_dr: {cell.rejection_rate:.4f} (se {cell.mc_se:.4f}) "
          f"[{time.time()-t0:.0f}s]", flush=True)
elif which == "comparators":
    for m in ("naive_forced", "naive_unforced", "pds_cv"):
        t0 = time.time()
        cell = monte_carlo_type1(m, params, reps=REPS, alpha=0.05,
                                 master_seed=1, workers=2)
        print(f"{m}: {cell.rejection_rate:.4f} (se {cell.mc_se:.4f}) "
              f"[{time.time()-t0:.0f}s]", flush=True)
