import numpy as np
import pytest

from hddr.comparators import naive_post_selection_test, pds_cv_test
from hddr.model_core import Dataset, expit
from oracles import wls_normal_equations


def _benign_dataset(seed, n=250, p=4):
    """No confounding, orthogonal-ish design, n >> p."""
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n, p))
    a = (rng.uniform(size=n) < 0.5).astype(float)
    y = rng.normal(size=n)
    return Dataset(y=y, a=a, L=L)


class TestNaivePostSelection:
    def test_finite_t_statistic_and_valid_p(self):
        d = _benign_dataset(0)
        for forced in (True, False):
            res = naive_post_selection_test(d, forced=forced, k_folds=5,
                                            seed=1)
            assert np.isfinite(res.t_n)
            assert 0.0 <= res.p_value <= 1.0
            assert res.method == ("naive_forced" if forced
                                  else "naive_unforced")
            assert res.diagnostics["reference"].startswith("t(")

    def test_forced_exposure_is_never_penalized_away(self):
        d = _benign_dataset(3)
        res = naive_post_selection_test(d, forced=True, k_folds=5, seed=1)
        assert res.diagnostics["exposure_selected"]

    def test_unforced_with_unselected_exposure_still_tests(self):
        # independent exposure: typically not selected, yet a t-statistic
        # must exist because the refit includes the exposure column anyway
        seen_unselected = False
        for s in range(10):
            d = _benign_dataset(100 + s)
            res = naive_post_selection_test(d, forced=False, k_folds=5,
                                            seed=s)
            assert np.isfinite(res.t_n)
            if not res.diagnostics["exposure_selected"]:
                seen_unselected = True
        assert seen_unselected

    def test_benign_regime_size_near_nominal(self):
        rejections = 0
        runs = 300
        for s in range(runs):
            d = _benign_dataset(2000 + s)
            res = naive_post_selection_test(d, forced=True, k_folds=5,
                                            seed=s)
            if res.p_value <= 0.05:
                rejections += 1
        rate = rejections / runs
        assert 0.02 <= rate <= 0.09


class TestPdsCv:
    def test_union_contains_both_supports(self):
        rng = np.random.default_rng(5)
        n, p = 150, 30
        L = rng.normal(size=(n, p))
        gamma = np.zeros(p)
        gamma[:3] = (1.0, -0.8, 0.6)
        beta = np.zeros(p)
        beta[3:6] = (0.9, -0.7, 0.5)
        a = (rng.uniform(size=n) < expit(L @ gamma)).astype(float)
        y = L @ beta + rng.normal(size=n)
        d = Dataset(y=y, a=a, L=L)
        res = pds_cv_test(d, k_folds=5, seed=2)
        union = set(res.diagnostics["union_support"])
        assert set(res.diagnostics["outcome_support"]) <= union
        assert set(res.diagnostics["exposure_support"]) <= union
        assert res.diagnostics["reference"] == "normal (HC1 robust)"

    def test_benign_regime_size_near_nominal(self):
        rejections = 0
        runs = 300
        for s in range(runs):
            d = _benign_dataset(7000 + s)
            res = pds_cv_test(d, k_folds=5, seed=s)
            if res.p_value <= 0.05:
                rejections += 1
        rate = rejections / runs
        assert 0.02 <= rate <= 0.09

    def test_robust_close_to_classical_when_homoscedastic(self):
        # on homoscedastic, weakly-selected designs the HC1 standard error
        # should sit within 10% of the classical OLS standard error
        close = 0
        runs = 100
        for s in range(runs):
            rng = np.random.default_rng(41000 + s)
            n, p = 2000, 5
            L = rng.normal(size=(n, p))
            a = (rng.uniform(size=n) < 0.5).astype(float)
            y = L @ np.array([0.5, -0.4, 0.3, 0.0, 0.0]) + rng.normal(size=n)
            d = Dataset(y=y, a=a, L=L)
            res = pds_cv_test(d, k_folds=5, seed=s)
            se_robust = res.score_sd / np.sqrt(n)

            union = res.diagnostics["union_support"]
            design = np.column_stack([np.ones(n), a, L[:, union]])
            b0, coefs = wls_normal_equations(design[:, 1:], y, np.ones(n))
            resid = y - design @ np.concatenate([[b0], coefs])
            k = design.shape[1]
            sigma2 = resid @ resid / (n - k)
            XtX_inv = np.linalg.inv(design.T @ design)
            se_classical = np.sqrt(sigma2 * XtX_inv[1, 1])
            if abs(se_robust / se_classical - 1.0) <= 0.10:
                close += 1
        assert close == runs

    def test_union_too_large_raises(self, monkeypatch):
        # drive the guard directly: stub the selection step to return
        # dense supports, leaving the union with no residual degrees of
        # freedom
        import hddr.comparators as comp
        from hddr.errors import UnionTooLargeError
        from hddr.model_core import WorkingModel
        from hddr.penalized_glm import CvResult, LassoFit

        rng = np.random.default_rng(11)
        n, p = 25, 30
        L = rng.normal(size=(n, p))
        y = L[:, 0] + rng.normal(size=n)
        a = (rng.uniform(size=n) < 0.5).astype(float)
        d = Dataset(y=y, a=a, L=L)

        def fake_cv_fit(Lm, ym, w, link, k, seed, **kwargs):
            coef = np.ones(p)
            model = WorkingModel(link, 0.0, coef)
            cv = CvResult(np.array([0.1]), np.array([1.0]), 0.1,
                          np.zeros(n, dtype=np.int64), 0.1, np.array([0.0]))
            return cv, LassoFit(model, 0.1, 1, True, 0.0, np.ones(p))

        monkeypatch.setattr(comp, "cv_fit", fake_cv_fit)
        with pytest.raises(UnionTooLargeError):
            pds_cv_test(d, k_folds=5, seed=1)
