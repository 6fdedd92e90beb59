"""Data-generating process, Monte Carlo driver, and the size-study table.

The DGP draws i.i.d. standard-normal covariates, a Bernoulli exposure with
logistic propensity expit(gamma0 + gamma'L), and a unit-variance normal
outcome with mean beta0 + beta'L (no exposure term: data are generated
under the null).  The coefficient vectors carry log-decaying blocks and
are rescaled to fixed Euclidean norms, so the exposure model is sparse
while the outcome model has a second, moderately strong block that the
exposure model ignores.  The misspecified-outcome variant feeds the first
three covariates through absolute values while analysts still fit linear
models on the raw columns.

Reproducibility: every replication r draws its own counter-based Philox
stream from SeedSequence(master_seed, spawn_key=(r,)); the first child
drives data generation and the second the method's cross-validation
folds.  Aggregation is indexed by replication, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import HddrError, ValidationError
from .model_core import Dataset, LinkFunction, WorkingModel, expit
from .score_test import ALL_METHODS, run_test

TABLE_METHODS = ("naive_forced", "naive_unforced", "pds_cv", "pmle_dr",
                 "br_dr")


@dataclass(frozen=True, eq=False)
class DgpParams:
    """Simulation truth: coefficient vectors, intercepts, and variant
    flags.  ``randomized_exposure_p``, when set, replaces the logistic
    exposure mechanism with a constant randomization probability (the
    known-propensity setting)."""

    n: int
    p: int
    beta: np.ndarray
    gamma: np.ndarray
    beta0: float = 1.0
    gamma0: float = 2.0
    misspecified_outcome: bool = False
    randomized_exposure_p: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta",
                           np.ascontiguousarray(self.beta, dtype=float))
        object.__setattr__(self, "gamma",
                           np.ascontiguousarray(self.gamma, dtype=float))


def build_dgp_params(n: int, p: int, misspecified: bool = False) -> DgpParams:
    """Coefficient construction: the outcome vector has a descending
    log-block on positions 1..19 and an ascending one on 82..100 (1-based),
    zero elsewhere, rescaled to norm 2; the exposure vector has the
    descending block only, rescaled to norm 3."""
    if p < 100:
        raise ValidationError(f"need p >= 100 for the block layout, got {p}")
    rtn = np.sqrt(n)
    b = np.zeros(p)
    j = np.arange(1, 20)
    b[j - 1] = 2.0 * np.log(21 - j) / rtn
    j2 = np.arange(82, 101)
    b[j2 - 1] = 10.0 * np.log(j2 - 80) / rtn
    beta = 2.0 * b / np.linalg.norm(b)

    g = np.zeros(p)
    g[j - 1] = 40.0 * np.log(21 - j) / rtn
    gamma = 3.0 * g / np.linalg.norm(g)
    return DgpParams(n=n, p=p, beta=beta, gamma=gamma,
                     misspecified_outcome=misspecified)


def true_outcome_mean(params: DgpParams, L: np.ndarray) -> np.ndarray:
    """E(Y | L) under the simulation truth (handles the absolute-value
    variant)."""
    if params.misspecified_outcome:
        Lt = np.column_stack([np.abs(L[:, :3]), L[:, 3:]])
        return params.beta0 + Lt @ params.beta
    return params.beta0 + L @ params.beta


def true_propensity(params: DgpParams, L: np.ndarray) -> np.ndarray:
    """P(A = 1 | L) under the simulation truth."""
    if params.randomized_exposure_p is not None:
        return np.full(L.shape[0], params.randomized_exposure_p)
    return expit(params.gamma0 + L @ params.gamma)


def true_exposure_model(params: DgpParams) -> WorkingModel:
    return WorkingModel(LinkFunction.LOGIT, params.gamma0, params.gamma)


def true_outcome_model(params: DgpParams) -> WorkingModel:
    """The linear working model matching the truth (correct only when the
    outcome is not misspecified)."""
    return WorkingModel(LinkFunction.IDENTITY, params.beta0, params.beta)


def generate_dataset(params: DgpParams, seed) -> Dataset:
    """Draw one dataset.  ``seed`` may be an int or a SeedSequence; the
    stream is Philox, and draw order is covariates, exposure uniforms,
    outcome noise."""
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    rng = np.random.Generator(np.random.Philox(ss))
    L = rng.standard_normal((params.n, params.p))
    pi = true_propensity(params, L)
    a = (rng.random(params.n) < pi).astype(float)
    y = true_outcome_mean(params, L) + rng.standard_normal(params.n)
    return Dataset(y=y, a=a, L=L)


@dataclass(frozen=True, eq=False)
class MethodCell:
    """One method's rejection summary within a simulation cell."""

    rejection_rate: float
    reps: int
    mc_se: float
    n_failed: int = 0


@dataclass(frozen=True, eq=False)
class SimReport:
    """Rejection rates for one (n, p, variant) simulation cell."""

    n: int
    p: int
    alpha: float
    misspecified: bool
    master_seed: int
    results: dict[str, MethodCell] = field(default_factory=dict)


def _rep_worker(args) -> tuple[int, float, str | None]:
    (method, params, master_seed, rep, k_folds, options) = args
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(rep,))
    data_seed, method_seed = ss.spawn(2)
    d = generate_dataset(params, data_seed)
    try:
        res = run_test(d, method, outcome_link=LinkFunction.IDENTITY,
                       k_folds=k_folds, seed=method_seed, **options)
        return rep, res.p_value, None
    except HddrError as exc:  # a rep never aborts the study
        return rep, float("nan"), repr(exc)


def monte_carlo_type1(method: str, params: DgpParams, reps: int,
                      alpha: float = 0.05, master_seed: int = 1,
                      workers: int = 1, k_folds: int = 10,
                      method_options: dict[str, Any] | None = None,
                      progress=None) -> MethodCell:
    """Empirical rejection rate of ``method`` over ``reps`` null
    replications.  Failed replications are counted and excluded from the
    rate; the output is independent of ``workers``."""
    if method not in ALL_METHODS:
        raise ValidationError(f"unknown method {method!r}")
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    options = dict(method_options or {})
    jobs = [(method, params, master_seed, rep, k_folds, options)
            for rep in range(reps)]
    pvals = np.empty(reps)
    errors: list[str] = []
    if workers <= 1:
        results = map(_rep_worker, jobs)
        done = 0
        for rep, p, err in results:
            pvals[rep] = p
            if err is not None:
                errors.append(err)
            done += 1
            if progress is not None:
                progress(done, reps)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            done = 0
            for rep, p, err in ex.map(_rep_worker, jobs, chunksize=4):
                pvals[rep] = p
                if err is not None:
                    errors.append(err)
                done += 1
                if progress is not None:
                    progress(done, reps)
    ok = np.isfinite(pvals)
    n_ok = int(ok.sum())
    rate = float(np.mean(pvals[ok] <= alpha)) if n_ok else float("nan")
    mc_se = float(np.sqrt(rate * (1.0 - rate) / n_ok)) if n_ok else float("nan")
    return MethodCell(rejection_rate=rate, reps=n_ok, mc_se=mc_se,
                      n_failed=reps - n_ok)


DEFAULT_CELLS = ((200, 200, False), (200, 200, True),
                 (500, 500, False), (500, 500, True))


def reproduce_table1(reps: int = 1000, master_seed: int = 1, workers: int = 1,
                     alpha: float = 0.05,
                     cells: Sequence[tuple[int, int, bool]] = DEFAULT_CELLS,
                     methods: Sequence[str] = TABLE_METHODS,
                     k_folds: int = 10,
                     progress=None) -> tuple[SimReport, ...]:
    """Run the full size study: every method on every requested
    (n, p, misspecified) cell, with paired datasets across methods (the
    same master seed drives each method's replication streams)."""
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    reports = []
    for (n, p, misspec) in cells:
        params = build_dgp_params(n, p, misspecified=misspec)
        results: dict[str, MethodCell] = {}
        for method in methods:
            if progress is not None:
                progress(f"cell n={n} p={p} "
                         f"{'misspecified' if misspec else 'correct'}: "
                         f"{method}")
            results[method] = monte_carlo_type1(
                method, params, reps, alpha=alpha, master_seed=master_seed,
                workers=workers, k_folds=k_folds)
        reports.append(SimReport(n=n, p=p, alpha=alpha, misspecified=misspec,
                                 master_seed=master_seed, results=results))
    return tuple(reports)


def report_rows(reports: Sequence[SimReport]) -> list[dict[str, Any]]:
    """Flatten cell reports into one row per (cell, method)."""
    rows = []
    for rep in reports:
        for method, cell in rep.results.items():
            rows.append({
                "n": rep.n,
                "p": rep.p,
                "outcome_model": ("misspecified" if rep.misspecified
                                  else "correct"),
                "method": method,
                "rejection_rate": cell.rejection_rate,
                "mc_se": cell.mc_se,
                "reps": cell.reps,
                "n_failed": cell.n_failed,
                "alpha": rep.alpha,
                "master_seed": rep.master_seed,
            })
    return rows


def report_to_csv(reports: Sequence[SimReport]) -> str:
    rows = report_rows(reports)
    header = ["n", "p", "outcome_model", "method", "rejection_rate",
              "mc_se", "reps", "n_failed", "alpha", "master_seed"]
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(r[h]) if isinstance(r[h], float)
                              else str(r[h]) for h in header))
    return "\n".join(lines) + "\n"


def report_to_text(reports: Sequence[SimReport]) -> str:
    """Aligned human-readable rendering of the same rows."""
    rows = report_rows(reports)
    header = ("n", "p", "outcome model", "method", "rate", "mc se",
              "reps", "failed")
    table = [header]
    for r in rows:
        table.append((str(r["n"]), str(r["p"]), r["outcome_model"],
                      r["method"], f"{r['rejection_rate']:.3f}",
                      f"{r['mc_se']:.4f}", str(r["reps"]),
                      str(r["n_failed"])))
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[j])
                               for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * widths[j]
                                   for j in range(len(header))))
    return "\n".join(lines) + "\n"


def report_to_json_payload(reports: Sequence[SimReport]) -> dict[str, Any]:
    return {"schema_version": 1, "rows": report_rows(reports)}
