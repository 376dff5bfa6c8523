import math

import numpy as np
import pytest
from scipy.stats import ks_2samp as scipy_ks

from tiltedlines.estimators import (C_FS, InsufficientDataError, TailFit,
                                    batch_means_se, covariance_lag,
                                    fit_upper_tail, geweke_z,
                                    integrated_autocorr_time, ks_2sample,
                                    local_loglog_slope, lower_tail_curve,
                                    pinning_check, scaling_check,
                                    tail_coefficient_ck)
from tiltedlines.gibbs import SampleSet
from tiltedlines.model import ModelError
from tiltedlines.rng import RngStream


def _synthetic_tail(c, n, seed):
    """Samples with CCDF exactly exp(-c t^{3/2})."""
    u = RngStream(seed).uniform(n)
    return (-np.log(u) / c) ** (2.0 / 3.0)


class TestFitUpperTail:
    def test_self_consistency_exact_model(self):
        s = _synthetic_tail(1.0, 10 ** 5, 1)
        fit = fit_upper_tail(s, (1.5, 2.5))
        assert abs(fit.c_hat - 1.0) <= 2 * fit.se + 0.01
        assert fit.r2 > 0.999

    def test_parametric_bootstrap_consistency(self):
        s = _synthetic_tail(0.8, 10 ** 5, 2)
        fit = fit_upper_tail(s, (1.5, 2.5))
        s2 = _synthetic_tail(fit.c_hat, 10 ** 5, 3)
        fit2 = fit_upper_tail(s2, (1.5, 2.5))
        assert abs(fit2.c_hat - fit.c_hat) <= 2 * math.hypot(fit.se, fit2.se) + 0.01

    def test_insufficient_data(self):
        s = _synthetic_tail(1.0, 200, 4)
        with pytest.raises(InsufficientDataError):
            fit_upper_tail(s, (3.0, 6.0))

    def test_window_validation(self):
        with pytest.raises(ModelError):
            fit_upper_tail(np.ones(10), (2.0, 1.0))

    def test_deterministic(self):
        s = _synthetic_tail(1.0, 10 ** 4, 5)
        f1 = fit_upper_tail(s, (1.0, 2.0))
        f2 = fit_upper_tail(s, (1.0, 2.0))
        assert f1 == f2


class TestTailCoefficient:
    def test_c0(self):
        assert tail_coefficient_ck(0, 2.0) == pytest.approx(C_FS, abs=1e-12)
        assert C_FS == pytest.approx(0.9428090416, abs=1e-9)

    def test_infinite_lambda4(self):
        # sqrt(lam)/(sqrt(lam)-1) = 2 at lam=4
        assert tail_coefficient_ck(None, 4.0) == pytest.approx(
            2 * 0.9428090416, abs=1e-8)

    def test_increasing_in_k(self):
        vals = [tail_coefficient_ck(k, 2.0) for k in range(7)]
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] < tail_coefficient_ck(None, 2.0)

    def test_domain(self):
        with pytest.raises(ModelError):
            tail_coefficient_ck(2, 1.0)


class TestLowerTail:
    def test_eps_above_max(self):
        s = np.array([0.5, 1.0, 2.0])
        rows = lower_tail_curve(s, [5.0])
        assert rows[0]["p_hat"] == 1.0

    def test_fs_baseline_present(self):
        rows = lower_tail_curve(np.linspace(0.01, 3, 1000), [0.1, 0.4])
        for r in rows:
            assert 0 < r["fs_baseline"] < 1
            assert r["ci_lo"] <= r["p_hat"] <= r["ci_hi"]

    def test_local_slope_on_cubic_law(self):
        # P(X <= eps) = eps^3 on [0,1]: slope = 3 at any eps
        u = RngStream(6).uniform(10 ** 6)
        s = u ** (1.0 / 3.0)
        slope, se, _, _ = local_loglog_slope(s, 0.2)
        assert abs(slope - 3.0) < 4 * se + 0.02


class TestCovarianceLag:
    def test_lag0_is_variance(self):
        r = np.random.default_rng(0)
        paths = r.normal(size=(50, 200))
        rows = covariance_lag(paths, 0.1, [0])
        assert rows[0]["cov"] == pytest.approx(paths.var(), rel=1e-12)

    def test_white_noise_decorrelated(self):
        r = np.random.default_rng(1)
        paths = r.normal(size=(200, 400))
        rows = covariance_lag(paths, 0.1, [1, 5, 20])
        for row in rows:
            assert abs(row["cov"]) < 4 * max(row["se"], 1e-4)

    def test_lag_bounds(self):
        with pytest.raises(ModelError):
            covariance_lag(np.zeros((5, 10)), 0.1, [10])

    def test_caveat_recorded(self):
        rows = covariance_lag(np.zeros((4, 8)) + 1.0, 0.1, [1])
        assert "spatial" in rows[0]["caveat"]


class TestKS:
    def test_identical_samples_zero(self):
        a = np.random.default_rng(2).normal(size=500)
        d, p = ks_2sample(a, a.copy())
        assert d == 0.0 and p == pytest.approx(1.0, abs=1e-6)

    def test_monotone_transform_invariance(self):
        r = np.random.default_rng(3)
        a, b = r.normal(size=400), r.normal(size=300) + 0.3
        d1, _ = ks_2sample(a, b)
        f = lambda x: np.exp(x) + x ** 3
        d2, _ = ks_2sample(f(a), f(b))
        assert d1 == pytest.approx(d2, abs=1e-12)

    def test_matches_scipy(self):
        r = np.random.default_rng(4)
        a, b = r.normal(size=800), r.normal(0.2, 1.1, size=700)
        d, p = ks_2sample(a, b)
        ref = scipy_ks(a, b)
        assert d == pytest.approx(ref.statistic, abs=1e-12)
        assert p == pytest.approx(ref.pvalue, abs=0.02)


class TestDiagnostics:
    def test_iat_iid(self):
        x = np.random.default_rng(5).normal(size=20000)
        assert integrated_autocorr_time(x) < 1.5

    def test_iat_correlated(self):
        r = np.random.default_rng(6)
        x = np.empty(20000)
        x[0] = 0.0
        for i in range(1, x.size):
            x[i] = 0.95 * x[i - 1] + r.normal()
        tau = integrated_autocorr_time(x)
        assert 20 < tau < 60  # true IAT = (1+rho)/(1-rho) = 39

    def test_geweke_iid(self):
        x = np.random.default_rng(7).normal(size=10000)
        assert abs(geweke_z(x)) < 3.0

    def test_batch_means_iid(self):
        x = np.random.default_rng(8).normal(size=10000)
        assert batch_means_se(x) == pytest.approx(1.0 / 100.0, rel=0.5)


class TestPinningCheck:
    def _sampleset(self, wmax):
        return SampleSet(np.zeros((wmax.shape[0], wmax.shape[1], 1)),
                         np.array([0.0]), wmax, 1.0, {}, None)

    def test_eps_above_global_max(self):
        wmax = np.abs(np.random.default_rng(9).normal(size=(500, 3)))
        res = pinning_check(self._sampleset(wmax), eps=wmax.max() + 1)
        assert res["qualified"] and res["k"] == 1

    def test_finds_first_qualifying_line(self):
        r = np.random.default_rng(10)
        wmax = np.column_stack([r.uniform(1, 2, 400), r.uniform(0.0, 0.05, 400)])
        res = pinning_check(self._sampleset(wmax), eps=0.2)
        assert res["qualified"] and res["k"] == 2

    def test_failure_reports_best(self):
        wmax = np.full((100, 2), 5.0)
        res = pinning_check(self._sampleset(wmax), eps=0.1)
        assert not res["qualified"] and res["p_hat"] == 0.0

    def test_monotone_in_eps(self):
        r = np.random.default_rng(11)
        wmax = np.column_stack([r.uniform(0.5, 2.0, 500),
                                r.uniform(0.1, 0.8, 500),
                                r.uniform(0.0, 0.2, 500)])
        ks = [pinning_check(self._sampleset(wmax), eps=e)["k"]
              for e in (0.9, 2.5)]
        assert ks[1] <= ks[0]


class TestScalingCheck:
    def test_identity_near_lambda_one(self):
        # lam -> 1: the rescaling map degenerates to the identity
        res = scaling_check(1, 2.0, 1.0, 1.0 + 1e-9, 1200, seed=12, dt=0.1,
                            thin=5, burn_in=600)
        assert res["ks_p"] > 0.01
