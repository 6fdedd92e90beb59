import math

import numpy as np
import pytest

from hddr.errors import ValidationError, ZeroVarianceError
from hddr.model_core import Dataset, LinkFunction, WorkingModel, expit
from hddr.nuisance import NuisanceFit, NuisanceMethod
from hddr.score_test import normal_two_sided_p, run_test, score_contributions
from hddr.score_test import test_statistic as compute_statistic

IDENT = LinkFunction.IDENTITY
LOGIT = LinkFunction.LOGIT


def _fit_from(pi, outcome_model):
    return NuisanceFit(
        exposure_model=None,
        outcome_model=outcome_model,
        method=NuisanceMethod.KNOWN_PROPENSITY,
        lambda_gamma=float("nan"),
        lambda_beta=float("nan"),
        refitted=False,
        propensity=np.asarray(pi, dtype=float),
    )


class TestScoreContributions:
    def test_perfect_exposure_fit_zeroes_scores(self):
        rng = np.random.default_rng(0)
        L = rng.normal(size=(6, 2))
        a = np.array([0.3, 0.7, 0.5, 0.2, 0.9, 0.1])
        y = rng.normal(size=6)
        d = Dataset(y=y, a=a, L=L)
        fit = _fit_from(a, WorkingModel(IDENT, 0.0, np.zeros(2)))
        np.testing.assert_array_equal(score_contributions(d, fit),
                                      np.zeros(6))

    def test_perfect_outcome_fit_zeroes_scores(self):
        L = np.zeros((4, 1))
        y = np.full(4, 2.5)
        a = np.array([0.0, 1.0, 1.0, 0.0])
        d = Dataset(y=y, a=a, L=L)
        fit = _fit_from(np.full(4, 0.5), WorkingModel(IDENT, 2.5, np.zeros(1)))
        np.testing.assert_array_equal(score_contributions(d, fit),
                                      np.zeros(4))

    def test_hand_value(self):
        d = Dataset(y=np.array([2.0, 2.0]), a=np.array([1.0, 1.0]),
                    L=np.zeros((2, 1)))
        fit = _fit_from([0.5, 0.5], WorkingModel(IDENT, 0.5, np.zeros(1)))
        np.testing.assert_array_equal(score_contributions(d, fit),
                                      [0.75, 0.75])


class TestTestStatistic:
    def test_constant_scores_rejected(self):
        with pytest.raises(ZeroVarianceError):
            compute_statistic(np.full(5, 3.0))

    def test_symmetric_pair(self):
        res = compute_statistic(np.array([1.0, -1.0]))
        assert res.t_n == 0.0
        assert res.p_value == 1.0

    def test_hand_evaluation(self):
        # mean 0.5, (1/n)-variance 1.25: t = 2 * 0.5 / sqrt(1.25)
        res = compute_statistic(np.array([2.0, 0.0, 1.0, -1.0]))
        assert res.t_n == pytest.approx(0.8944271909999159, abs=1e-15)
        assert res.p_value == pytest.approx(
            math.erfc(abs(res.t_n) / math.sqrt(2)), abs=0)
        assert res.score_mean == 0.5
        assert res.score_sd == pytest.approx(math.sqrt(1.25), abs=1e-15)

    def test_p_value_matches_normal_tail_formula(self):
        for t in (-3.2, -0.4, 0.0, 1.1, 5.5):
            res = compute_statistic(np.array([t, 0.0, 1.0, -1.0, 2.0]))
            from scipy.stats import norm

            assert res.p_value == pytest.approx(
                2 * (1 - norm.cdf(abs(res.t_n))), abs=1e-12)

    def test_sign_equivariance(self):
        rng = np.random.default_rng(1)
        U = rng.normal(size=40)
        plus = compute_statistic(U)
        minus = compute_statistic(-U)
        assert minus.t_n == -plus.t_n
        assert minus.p_value == plus.p_value

    def test_too_few_scores(self):
        with pytest.raises(ValidationError):
            compute_statistic(np.array([1.0]))


class TestLocationInvariance:
    def test_outcome_shift_with_matching_intercept_is_bit_identical(self):
        # integer-valued instance: the shifted sums are exact in floating
        # point, so U and t_n agree bit for bit
        L = np.array([[1.0], [2.0], [-1.0], [3.0], [0.0], [-2.0]])
        y = np.array([2.0, -1.0, 4.0, 0.0, 3.0, 1.0])
        a = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
        d = Dataset(y=y, a=a, L=L)
        model = WorkingModel(IDENT, 1.0, np.array([2.0]))
        fit = _fit_from(np.full(6, 0.5), model)
        base_U = score_contributions(d, fit)
        c = 7.0
        d_shift = Dataset(y=y + c, a=a, L=L)
        fit_shift = _fit_from(np.full(6, 0.5),
                              WorkingModel(IDENT, 1.0 + c, np.array([2.0])))
        shift_U = score_contributions(d_shift, fit_shift)
        np.testing.assert_array_equal(base_U, shift_U)
        r0 = compute_statistic(base_U)
        r1 = compute_statistic(shift_U)
        assert r0.t_n == r1.t_n and r0.p_value == r1.p_value


class TestRunTest:
    def _dataset(self, n=120, p=10, seed=3):
        rng = np.random.default_rng(seed)
        L = rng.normal(size=(n, p))
        gamma = np.zeros(p)
        gamma[:2] = (1.0, -0.7)
        beta = np.zeros(p)
        beta[:2] = (0.8, 0.6)
        a = (rng.uniform(size=n) < expit(L @ gamma)).astype(float)
        y = L @ beta + rng.normal(size=n)
        return Dataset(y=y, a=a, L=L)

    def test_score_methods_produce_valid_results(self):
        d = self._dataset()
        for method in ("pmle_dr", "br_dr"):
            res = run_test(d, method, k_folds=5, seed=2)
            assert res.method == method
            assert np.isfinite(res.t_n)
            assert 0.0 <= res.p_value <= 1.0
            assert res.n == d.n
            assert res.diagnostics["exposure_support_size"] >= 0
            assert res.t_n == pytest.approx(
                np.sqrt(res.n) * res.score_mean / res.score_sd, rel=1e-12)

    def test_known_propensity_route(self):
        d = self._dataset()
        res = run_test(d, "known_propensity", pi_star=0.5, k_folds=5, seed=2)
        assert res.method == "known_propensity"
        assert 0.0 <= res.p_value <= 1.0

    def test_unknown_method_rejected(self):
        d = self._dataset()
        with pytest.raises(ValidationError):
            run_test(d, "bootstrap")

    def test_binary_outcome_dispatches_to_alternating_scheme(self):
        rng = np.random.default_rng(9)
        n, p = 150, 15
        L = rng.normal(size=(n, p))
        a = (rng.uniform(size=n) < expit(0.5 + L[:, 0])).astype(float)
        y = (rng.uniform(size=n) < expit(-0.2 + 0.8 * L[:, 0])).astype(float)
        d = Dataset(y=y, a=a, L=L)
        res = run_test(d, "br_dr", outcome_link=LOGIT, k_folds=5, seed=4)
        assert "algorithm1_trace" in res.diagnostics
        assert 0.0 <= res.p_value <= 1.0

    def test_strong_alternative_detected(self):
        # the test is a size-controlled test, but power against an obvious
        # effect is a basic sanity requirement
        from hddr.simulation import build_dgp_params, true_outcome_mean, \
            true_propensity

        params = build_dgp_params(500, 100)
        hits = 0
        runs = 30
        for s in range(runs):
            rng = np.random.Generator(np.random.Philox(
                np.random.SeedSequence(entropy=424242, spawn_key=(s,))))
            L = rng.standard_normal((params.n, params.p))
            a = (rng.random(params.n)
                 < true_propensity(params, L)).astype(float)
            y = (true_outcome_mean(params, L) + a
                 + rng.standard_normal(params.n))
            d = Dataset(y=y, a=a, L=L)
            res = run_test(d, "pmle_dr", k_folds=5, seed=s)
            if res.p_value < 0.001:
                hits += 1
        assert hits >= runs - 1


class TestNormalTwoSidedP:
    def test_reference_values(self):
        assert normal_two_sided_p(0.0) == 1.0
        # Phi(1.96) two-sided: the classic 5% critical value
        assert normal_two_sided_p(1.959963984540054) == pytest.approx(
            0.05, abs=1e-12)
