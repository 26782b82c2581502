"""Tests for the hypothesis-pair models.

Closed-form divergences are checked against numerical quadrature of the
defining integrals, densities against their normalization and against
histograms of transformed samples, so every analytic shortcut has an
independent numerical route.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from bllr.detectors import Hypothesis
from bllr.models import (
    ExponentialPairModel,
    GammaPairModel,
    GaussianShiftModel,
    GlrtGaussianModel,
    KlPair,
    effective_divergence,
    glrt_increment,
)
from bllr.montecarlo import run_stream

GAUSS = GaussianShiftModel(mean_shift=0.5, sigma=1.0)
GAMMA = GammaPairModel(kappa=10.0, theta=1.0, rho=1.0)
EXPO = ExponentialPairModel(eta0=1.0, eta1=1.5)

# Frozen divergences, cross-checked against quadrature of
# int f1 log(f1/f0) below (test_kl_matches_quadrature).
GAMMA_D10 = 0.04916749607267468  # rho*psi(kappa+rho) - log Gamma ratio
GAMMA_D01 = 0.05083250392732586  # harmonic-number route: ln10 - (H9 - euler)
EXPO_D10 = 0.5 - math.log(1.5)  # 0.0945348918918356
EXPO_D01 = 2.0 / 3.0 - 1.0 + math.log(1.5)  # 0.0721317748029538


class TestValidation:
    def test_gaussian_needs_nonzero_shift(self):
        with pytest.raises(ValueError):
            GaussianShiftModel(0.0, 1.0)
        with pytest.raises(ValueError):
            GaussianShiftModel(0.5, -1.0)

    def test_gamma_positive_parameters(self):
        with pytest.raises(ValueError):
            GammaPairModel(kappa=-1.0)

    def test_exponential_ordering(self):
        with pytest.raises(ValueError):
            ExponentialPairModel(1.5, 1.0)

    def test_kl_pair_positive(self):
        with pytest.raises(ValueError):
            KlPair(0.0, 0.1)


class TestLoglik:
    def test_gaussian_symmetry_midpoint(self):
        # d = m*x/sigma^2 - D vanishes at x = m/2.
        assert GAUSS.loglik(0.25) == pytest.approx(0.0, abs=1e-15)

    def test_exponential_boundary_value(self):
        assert EXPO.loglik(0.0) == pytest.approx(-math.log(1.5))

    def test_gamma_zero_crossing(self):
        # Gamma(11)/Gamma(10) = 10, so d = log x - log 10 vanishes at x=10.
        assert GAMMA.loglik(10.0) == pytest.approx(0.0, abs=1e-12)

    def test_out_of_support_rejected(self):
        with pytest.raises(ValueError):
            GAMMA.loglik(0.0)
        with pytest.raises(ValueError):
            EXPO.loglik(-0.5)
        with pytest.raises(ValueError):
            GAUSS.loglik(math.inf)

    def test_vectorized(self):
        x = np.array([0.25, 1.0, 2.0])
        d = GAUSS.loglik(x)
        assert d.shape == (3,)
        assert d[0] == pytest.approx(0.0, abs=1e-15)


class TestKlDivergences:
    def test_gaussian_closed_form(self):
        kl = GAUSS.kl_divergences()
        assert kl.d10 == kl.d01 == pytest.approx(0.125)

    def test_exponential_closed_form(self):
        kl = EXPO.kl_divergences()
        assert kl.d10 == pytest.approx(EXPO_D10, rel=1e-12)
        assert kl.d01 == pytest.approx(EXPO_D01, rel=1e-12)

    def test_gamma_closed_form(self):
        kl = GAMMA.kl_divergences()
        assert kl.d10 == pytest.approx(GAMMA_D10, rel=1e-12)
        assert kl.d01 == pytest.approx(GAMMA_D01, rel=1e-12)

    def test_gamma_digamma_matches_harmonic_numbers(self):
        # psi(n) = H_{n-1} - euler_gamma for integer arguments.
        euler = 0.5772156649015328606
        h9 = sum(1.0 / i for i in range(1, 10))
        h10 = h9 + 0.1
        assert GAMMA.kl_divergences().d10 == pytest.approx(
            (h10 - euler) - math.log(10.0), rel=1e-12
        )
        assert GAMMA.kl_divergences().d01 == pytest.approx(
            math.log(10.0) - (h9 - euler), rel=1e-12
        )

    @pytest.mark.parametrize(
        "model,f1,f0,lo,hi",
        [
            (GAUSS, stats.norm(0.5, 1.0).pdf, stats.norm(0.0, 1.0).pdf, -12.0, 12.5),
            (
                GAMMA,
                stats.gamma(11.0, scale=1.0).pdf,
                stats.gamma(10.0, scale=1.0).pdf,
                1e-9,
                200.0,
            ),
            (
                EXPO,
                stats.expon(scale=1.5).pdf,
                stats.expon(scale=1.0).pdf,
                1e-12,
                60.0,
            ),
        ],
    )
    def test_kl_matches_quadrature(self, model, f1, f0, lo, hi):
        d10, _ = integrate.quad(lambda x: f1(x) * np.log(f1(x) / f0(x)), lo, hi, limit=300)
        d01, _ = integrate.quad(lambda x: f0(x) * np.log(f0(x) / f1(x)), lo, hi, limit=300)
        kl = model.kl_divergences()
        assert kl.d10 == pytest.approx(d10, abs=1e-4)
        assert kl.d01 == pytest.approx(d01, abs=1e-4)


class TestEffectiveDivergence:
    def test_symmetric_case(self):
        assert effective_divergence(KlPair(0.125, 0.125)) == pytest.approx(0.125)

    def test_asymmetric_value(self):
        # Direct evaluation of 2*d10*d01/(d10+d01) at the exponential pair.
        value = effective_divergence(KlPair(EXPO_D10, EXPO_D01))
        assert value == pytest.approx(
            2 * EXPO_D10 * EXPO_D01 / (EXPO_D10 + EXPO_D01), rel=1e-14
        )
        assert value == pytest.approx(0.0818276, abs=5e-7)

    def test_vanishing_limit(self):
        assert effective_divergence(KlPair(0.125, 1e-12)) < 3e-12


class TestSampling:
    @pytest.mark.parametrize(
        "model,h,mean,sd",
        [
            (GAUSS, Hypothesis.H0, 0.0, 1.0),
            (GAUSS, Hypothesis.H1, 0.5, 1.0),
            (EXPO, Hypothesis.H1, 1.5, 1.5),
            (GAMMA, Hypothesis.H1, 11.0, math.sqrt(11.0)),
        ],
    )
    def test_sample_mean_within_three_se(self, model, h, mean, sd):
        n = 100_000
        draws = model.sample(h, run_stream(2024, 0, label="models"), n)
        assert abs(draws.mean() - mean) < 3 * sd / math.sqrt(n)

    @pytest.mark.parametrize("model", [GAUSS, GAMMA, EXPO])
    def test_increment_sign_structure(self, model):
        # E1[d] = D10 > 0 and E0[d] = -D01 < 0 within three standard errors.
        n = 100_000
        kl = model.kl_divergences()
        for h, target in ((Hypothesis.H1, kl.d10), (Hypothesis.H0, -kl.d01)):
            d = model.sample_increments(h, run_stream(99, 1, label="models"), n)
            se = d.std(ddof=1) / math.sqrt(n)
            assert abs(d.mean() - target) < 3 * se
            assert (d.mean() > 0) == (h is Hypothesis.H1)

    @pytest.mark.parametrize("model", [GAUSS, GAMMA, EXPO])
    @pytest.mark.parametrize("h", [Hypothesis.H0, Hypothesis.H1])
    def test_increment_moments_match_samples(self, model, h):
        n = 200_000
        d = model.sample_increments(h, run_stream(5, 2, label="models"), n)
        mean, var = model.increment_moments(h)
        assert abs(d.mean() - mean) < 4 * math.sqrt(var / n)
        assert d.var(ddof=1) == pytest.approx(var, rel=0.05)


class TestIncrementDensity:
    @pytest.mark.parametrize("model", [GAUSS, GAMMA, EXPO])
    @pytest.mark.parametrize("h", [Hypothesis.H0, Hypothesis.H1])
    def test_normalization(self, model, h):
        mean, var = model.increment_moments(h)
        sd = math.sqrt(var)
        if isinstance(model, ExponentialPairModel):
            lo = -math.log(model.eta_ratio)
            hi = lo + 40.0 * (model.eta_ratio - 1.0)
        else:
            lo, hi = mean - 12 * sd, mean + 12 * sd
        total, _ = integrate.quad(model.increment_density(h), lo, hi, limit=300)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_h0_is_normal_minus_d_2d(self):
        pdf = GAUSS.increment_density(Hypothesis.H0)
        ref = stats.norm(-0.125, math.sqrt(0.25)).pdf
        xs = np.linspace(-2, 2, 41)
        assert np.allclose(pdf(xs), ref(xs), rtol=1e-12)

    def test_exponential_h0_closed_form(self):
        # eta_e/(eta_e-1) exp(-eta_e (z+log eta_e)/(eta_e-1)) above -log eta_e.
        eta = 1.5
        pdf = EXPO.increment_density(Hypothesis.H0)
        zs = np.linspace(-math.log(eta) + 1e-9, 1.5, 20)
        ref = eta / (eta - 1) * np.exp(-eta * (zs + math.log(eta)) / (eta - 1))
        assert np.allclose(pdf(zs), ref, rtol=1e-12)
        assert pdf(-math.log(eta) - 0.01) == 0.0

    @pytest.mark.parametrize("model", [GAUSS, GAMMA, EXPO])
    @pytest.mark.parametrize("h", [Hypothesis.H0, Hypothesis.H1])
    def test_density_consistent_with_sampled_increments(self, model, h):
        # KS distance between sampled increments and the CDF below 0.01.
        n = 100_000
        d = np.sort(model.sample_increments(h, run_stream(31, 3, label="models"), n))
        cdf = model.increment_cdf(h)(d)
        empirical_hi = np.arange(1, n + 1) / n
        empirical_lo = np.arange(0, n) / n
        ks = max(np.abs(cdf - empirical_hi).max(), np.abs(cdf - empirical_lo).max())
        assert ks < 0.01

    @pytest.mark.parametrize("model", [GAUSS, GAMMA, EXPO])
    @pytest.mark.parametrize("h", [Hypothesis.H0, Hypothesis.H1])
    def test_cdf_is_integral_of_density(self, model, h):
        mean, var = model.increment_moments(h)
        sd = math.sqrt(var)
        lo = mean - 12 * sd if not isinstance(model, ExponentialPairModel) else -math.log(1.5)
        pdf, cdf = model.increment_density(h), model.increment_cdf(h)
        for z in (mean - sd, mean, mean + 2 * sd):
            num, _ = integrate.quad(pdf, lo, z, limit=300)
            assert num == pytest.approx(float(cdf(z)) - float(cdf(lo)), abs=1e-7)


class TestGlrtIncrement:
    def test_boundary_is_zero(self):
        for sigma in (0.01, 0.036, 1.0):
            assert glrt_increment(1.0, sigma) == 0.0

    def test_half_unit_values(self):
        assert glrt_increment(1.036, 0.036) == pytest.approx(0.5)
        assert glrt_increment(0.964, 0.036) == pytest.approx(-0.5)

    def test_odd_symmetry(self):
        # Exact in reals; 1+u and 1-u round differently, hence the rtol.
        rng = np.random.default_rng(3)
        u = rng.uniform(0, 0.5, 100)
        left = glrt_increment(1.0 + u, 0.036)
        right = -np.asarray(glrt_increment(1.0 - u, 0.036))
        assert np.allclose(left, right, rtol=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            glrt_increment(math.nan, 0.036)
        with pytest.raises(ValueError):
            glrt_increment(1.0, 0.0)

    def test_model_wrapper(self):
        model = GlrtGaussianModel(sigma=0.036)
        assert model.increment(1.036) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            GlrtGaussianModel(sigma=-1.0)
