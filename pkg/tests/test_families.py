"""Family log-densities cross-checked against scipy.stats."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from jointgibbs.engine.families import (
    beta_loglik,
    binomial_loglik,
    clm_category_probs,
    clm_loglik,
    draw_response,
    gamma_loglik,
    gaussian_loglik,
    loglik_rows,
    lognorm_loglik,
    mlogit_log_probs,
    mlogit_loglik,
    poisson_loglik,
    weibull_loglik,
)

RNG = np.random.default_rng(20260822)


class TestAgainstScipy:
    def test_gaussian(self):
        y = RNG.normal(size=20)
        eta = RNG.normal(size=20)
        tau = 2.5
        expect = stats.norm.logpdf(y, loc=eta, scale=1 / np.sqrt(tau))
        np.testing.assert_allclose(gaussian_loglik(y, eta, tau), expect)

    def test_gaussian_log_link(self):
        y = RNG.normal(5, 1, size=20)
        eta = RNG.normal(1.5, 0.1, size=20)
        expect = stats.norm.logpdf(y, loc=np.exp(eta), scale=1.0)
        np.testing.assert_allclose(gaussian_loglik(y, eta, 1.0, link="log"), expect)

    def test_lognorm(self):
        y = RNG.lognormal(size=20)
        eta = RNG.normal(size=20)
        tau = 0.7
        expect = stats.lognorm.logpdf(y, s=1 / np.sqrt(tau), scale=np.exp(eta))
        np.testing.assert_allclose(lognorm_loglik(y, eta, tau), expect)

    def test_gamma_mean_precision(self):
        y = RNG.gamma(2.0, 1.0, size=20)
        eta = RNG.normal(0.5, 0.2, size=20)
        tau = 1.8
        mu = np.exp(eta)
        # shape=mu^2 tau, rate=mu tau gives mean mu and variance 1/tau
        expect = stats.gamma.logpdf(y, a=mu**2 * tau, scale=1 / (mu * tau))
        np.testing.assert_allclose(gamma_loglik(y, eta, tau, link="log"), expect)
        shape = mu**2 * tau
        np.testing.assert_allclose(shape / (mu * tau), mu)
        np.testing.assert_allclose(shape / (mu * tau) ** 2, np.full(20, 1 / tau))

    def test_beta_mean_precision(self):
        y = RNG.beta(2, 3, size=20)
        eta = RNG.normal(size=20)
        tau = 5.0
        mu = expit(eta)
        expect = stats.beta.logpdf(y, a=mu * tau, b=(1 - mu) * tau)
        np.testing.assert_allclose(beta_loglik(y, eta, tau), expect)

    def test_binomial_links(self):
        y01 = RNG.integers(0, 2, size=30).astype(float)
        eta = RNG.normal(size=30)
        for link, p in [
            ("logit", expit(eta)),
            ("probit", stats.norm.cdf(eta)),
            ("cloglog", -np.expm1(-np.exp(eta))),
        ]:
            expect = stats.bernoulli.logpmf(y01, p)
            np.testing.assert_allclose(binomial_loglik(y01, eta, link=link), expect,
                                       err_msg=link)
        eta_neg = -np.abs(eta) - 0.1
        expect = stats.bernoulli.logpmf(y01, np.exp(eta_neg))
        np.testing.assert_allclose(binomial_loglik(y01, eta_neg, link="log"), expect)

    def test_binomial_log_link_support(self):
        out = binomial_loglik(np.array([1.0]), np.array([0.5]), link="log")
        assert out[0] == -np.inf

    def test_poisson(self):
        y = RNG.poisson(3.0, size=20).astype(float)
        eta = RNG.normal(1.0, 0.3, size=20)
        expect = stats.poisson.logpmf(y, np.exp(eta))
        np.testing.assert_allclose(poisson_loglik(y, eta), expect)
        mu = np.exp(eta)
        np.testing.assert_allclose(poisson_loglik(y, mu, link="identity"), expect)

    def test_weibull(self):
        t = RNG.gamma(2.0, 1.0, size=20)
        eta = RNG.normal(size=20)
        shape = 1.7
        rate = np.exp(-eta)
        dens = stats.weibull_min.logpdf(t, c=shape, scale=1 / rate)
        surv = stats.weibull_min.logsf(t, c=shape, scale=1 / rate)
        events = np.ones(20)
        np.testing.assert_allclose(weibull_loglik(t, events, eta, shape), dens,
                                   rtol=1e-10)
        np.testing.assert_allclose(weibull_loglik(t, 1 - events, eta, shape), surv,
                                   rtol=1e-10)


class TestCategorical:
    def test_clm_probabilities(self):
        eta = RNG.normal(size=15)
        gammas = np.array([-1.0, 0.5, 2.0])
        probs = clm_category_probs(eta, gammas)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert np.all(probs >= 0)
        codes = RNG.integers(1, 5, size=15).astype(float)
        ll = clm_loglik(codes, eta, gammas)
        direct = np.log(probs[np.arange(15), codes.astype(int) - 1])
        np.testing.assert_allclose(ll, direct)

    def test_clm_higher_eta_prefers_higher_categories(self):
        gammas = np.array([-1.0, 1.0])
        lo = clm_category_probs(np.array([-3.0]), gammas)[0]
        hi = clm_category_probs(np.array([3.0]), gammas)[0]
        assert lo[0] > hi[0]
        assert hi[-1] > lo[-1]

    def test_mlogit_softmax(self):
        etas = RNG.normal(size=(12, 3))
        logp = mlogit_log_probs(etas)
        np.testing.assert_allclose(np.exp(logp).sum(axis=1), 1.0)
        # category 1 is the baseline with linear predictor 0
        expect = np.exp(etas[0]) / (1 + np.exp(etas[0]).sum())
        np.testing.assert_allclose(np.exp(logp[0, 1:]), expect)
        codes = np.array([1.0, 2.0, 4.0] * 4)
        ll = mlogit_loglik(codes, etas)
        np.testing.assert_allclose(ll, logp[np.arange(12), codes.astype(int) - 1])


class TestSupport:
    def test_out_of_support_is_minus_inf_not_nan(self):
        assert lognorm_loglik(np.array([-1.0]), np.zeros(1), 1.0)[0] == -np.inf
        assert gamma_loglik(np.array([1.0]), np.array([-2.0]), 1.0, link="identity")[0] == -np.inf
        assert beta_loglik(np.array([1.5]), np.zeros(1), 3.0)[0] == -np.inf
        assert weibull_loglik(np.array([-1.0]), np.ones(1), np.zeros(1), 1.0)[0] == -np.inf
        out = gaussian_loglik(np.array([0.0]), np.array([np.inf]), 1.0)
        assert out[0] == -np.inf
        out = poisson_loglik(np.array([2.0]), np.array([-1.0]), link="identity")
        assert out[0] == -np.inf
        assert poisson_loglik(np.array([0.0]), np.array([0.0]), link="identity")[0] == 0.0

    def test_dispatch(self):
        y = np.array([1.0, 2.0])
        eta = np.zeros(2)
        np.testing.assert_allclose(
            loglik_rows("glm_binomial_logit", y, eta, {}),
            np.log([0.5, 0.5]),
        )
        t = np.array([1.0, 2.0])
        ev = np.array([1.0, 0.0])
        out = loglik_rows("survreg", (t, ev), eta, {"shape": 1.0})
        np.testing.assert_allclose(out, [-1.0, -2.0])  # exponential special case


class TestDraws:
    def test_moments(self):
        n = 60000
        eta = np.full(n, 0.8)
        y = draw_response("lm", eta, {"tau": 4.0}, np.random.default_rng(1))
        assert abs(y.mean() - 0.8) < 0.01
        assert abs(y.std() - 0.5) < 0.01

        y = draw_response("glm_gamma_log", eta, {"tau": 2.0}, np.random.default_rng(2))
        assert abs(y.mean() - np.exp(0.8)) < 0.02
        assert abs(y.var() - 0.5) < 0.02

        y = draw_response("glm_binomial_logit", eta, {}, np.random.default_rng(3))
        assert set(np.unique(y)) == {1.0, 2.0}
        assert abs((y == 2.0).mean() - expit(0.8)) < 0.01

    def test_categorical_draws(self):
        n = 40000
        eta = np.zeros(n)
        gammas = np.array([-0.5, 1.0])
        y = draw_response("clm", eta, {"gamma": gammas}, np.random.default_rng(4))
        probs = clm_category_probs(np.zeros(1), gammas)[0]
        freq = np.array([(y == k).mean() for k in (1.0, 2.0, 3.0)])
        np.testing.assert_allclose(freq, probs, atol=0.01)

    def test_mlogit_draws(self):
        n = 40000
        etas = np.tile([[0.3, -0.2]], (n, 1))
        y = draw_response("mlogit", etas, {}, np.random.default_rng(5))
        expect = np.exp(mlogit_log_probs(etas[:1]))[0]
        freq = np.array([(y == k).mean() for k in (1.0, 2.0, 3.0)])
        np.testing.assert_allclose(freq, expect, atol=0.01)

    def test_invalid_mean_raises(self):
        with pytest.raises(ValueError):
            draw_response("glm_gamma_identity", np.array([-1.0]), {"tau": 1.0},
                          np.random.default_rng(0))
