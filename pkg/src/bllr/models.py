"""Hypothesis-pair observation models and their log-likelihood increments.

Each model describes a pair of data densities (f0, f1) and exposes:

    loglik(x)            increment d = log f1(x)/f0(x)
    kl_divergences()     KlPair(D10, D01) in closed form
    sample(h, rng)       draw observations under H0 or H1
    sample_increments    draw d directly (loglik of a sample)
    increment_density(h) callable density of d under H0 or H1
    increment_cdf(h)     callable CDF of d, used by the integral-equation
                         solvers to control domain truncation
    increment_moments(h) (mean, variance) of d; under H1 the mean is D10
                         and under H0 it is -D01

Three synthetic pairs are provided (Gaussian shift-in-mean, Gamma shape
pair, exponential scale pair) plus the GLRT increment for growth-rate
monitoring with unknown regime means, where the constrained ML estimates
min(x, 1) and max(x, 1) collapse the log-likelihood to

    d = (x - 1)^2 * sign(x - 1) / (2 sigma^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import special, stats

from .detectors import Hypothesis

__all__ = [
    "KlPair",
    "effective_divergence",
    "GaussianShiftModel",
    "GammaPairModel",
    "ExponentialPairModel",
    "GlrtGaussianModel",
    "Model",
    "glrt_increment",
]

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class KlPair:
    """The two Kullback-Leibler divergences of the pair.

    d10 = E1[d] > 0 is the divergence of f1 from f0, d01 = -E0[d] > 0 the
    reverse one.
    """

    d10: float
    d01: float

    def __post_init__(self) -> None:
        if not (self.d10 > 0 and self.d01 > 0):
            raise ValueError(
                f"divergences must be strictly positive, got {self.d10!r}, {self.d01!r}"
            )


def effective_divergence(kl: KlPair) -> float:
    """Harmonic-mean combination 2*D01*D10/(D01 + D10).

    Collapses to D when the pair is symmetric and tends to 0 when either
    divergence vanishes.
    """
    return 2.0 * kl.d10 * kl.d01 / (kl.d10 + kl.d01)


def _as_float_array(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("observation must be finite")
    return arr


def _scalar_or_array(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.isscalar(like) or getattr(like, "ndim", 1) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class GaussianShiftModel:
    """H0: N(0, sigma^2) versus H1: N(m, sigma^2) with m != 0.

    The increment is d = m*x/sigma^2 - D with D = m^2/(2 sigma^2), and d
    itself is Gaussian: N(-D, 2D) under H0 and N(D, 2D) under H1.
    """

    mean_shift: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma!r}")
        if self.mean_shift == 0 or not math.isfinite(self.mean_shift):
            raise ValueError(f"mean_shift must be finite and nonzero, got {self.mean_shift!r}")

    @property
    def divergence(self) -> float:
        return self.mean_shift**2 / (2.0 * self.sigma**2)

    def loglik(self, x: ArrayLike) -> ArrayLike:
        arr = _as_float_array(x)
        d = self.mean_shift * arr / self.sigma**2 - self.divergence
        return _scalar_or_array(d, x)

    def kl_divergences(self) -> KlPair:
        d = self.divergence
        return KlPair(d10=d, d01=d)

    def sample(self, h: Hypothesis, rng: np.random.Generator, size=None) -> ArrayLike:
        loc = self.mean_shift if h is Hypothesis.H1 else 0.0
        return rng.normal(loc, self.sigma, size)

    def sample_increments(self, h: Hypothesis, rng: np.random.Generator, size=None) -> ArrayLike:
        return self.loglik(self.sample(h, rng, size))

    def increment_moments(self, h: Hypothesis) -> tuple[float, float]:
        d = self.divergence
        mean = d if h is Hypothesis.H1 else -d
        return mean, 2.0 * d

    def increment_density(self, h: Hypothesis) -> Callable[[ArrayLike], ArrayLike]:
        mean, var = self.increment_moments(h)
        return stats.norm(loc=mean, scale=math.sqrt(var)).pdf

    def increment_cdf(self, h: Hypothesis) -> Callable[[ArrayLike], ArrayLike]:
        mean, var = self.increment_moments(h)
        return stats.norm(loc=mean, scale=math.sqrt(var)).cdf


@dataclass(frozen=True)
class GammaPairModel:
    """H0: Gamma(kappa, theta) versus H1: Gamma(kappa + rho, theta).

    The increment d = rho*log(x/theta) - log(Gamma(kappa+rho)/Gamma(kappa))
    is an affine transform of the log of a Gamma variate, i.e. it follows
    a scaled log-Gamma law under either hypothesis.
    """

    kappa: float
    theta: float = 1.0
    rho: float = 1.0

    def __post_init__(self) -> None:
        for name in ("kappa", "theta", "rho"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def _log_gamma_ratio(self) -> float:
        return special.gammaln(self.kappa + self.rho) - special.gammaln(self.kappa)

    def _shape(self, h: Hypothesis) -> float:
        return self.kappa + self.rho if h is Hypothesis.H1 else self.kappa

    def loglik(self, x: ArrayLike) -> ArrayLike:
        arr = _as_float_array(x)
        if np.any(arr <= 0):
            raise ValueError("Gamma observations must be > 0")
        d = self.rho * np.log(arr / self.theta) - self._log_gamma_ratio
        return _scalar_or_array(d, x)

    def kl_divergences(self) -> KlPair:
        lgr = self._log_gamma_ratio
        d10 = self.rho * special.digamma(self.kappa + self.rho) - lgr
        d01 = -self.rho * special.digamma(self.kappa) + lgr
        return KlPair(d10=d10, d01=d01)

    def sample(self, h: Hypothesis, rng: np.random.Generator, size=None) -> ArrayLike:
        return rng.gamma(self._shape(h), self.theta, size)

    def sample_increments(self, h: Hypothesis, rng: np.random.Generator, size=None) -> ArrayLike:
        return self.loglik(self.sample(h, rng, size))

    def increment_moments(self, h: Hypothesis) -> tuple[float, float]:
        shape = self._shape(h)
        # log(x/theta) for x ~ Gamma(shape, theta) has mean psi(shape) and
        # variance psi'(shape), independent of theta.
        mean = self.rho * special.digamma(shape) - self._log_gamma_ratio
        var = self.rho**2 * special.polygamma(1, shape)
        return float(mean), float(var)

    def increment_density(self, h: Hypothesis) -> Callable[[ArrayLike], ArrayLike]:
        shape = self._shape(h)
        rho, lgr = self.rho, self._log_gamma_ratio
        lg_shape = special.gammaln(shape)

        def pdf(z: ArrayLike) -> ArrayLike:
            y = (np.asarray(z, dtype=float) + lgr) / rho
            with np.errstate(over="ignore"):
                out = np.exp(shape * y - np.exp(y) - lg_shape) / rho
            return _scalar_or_array(out, z)

        return pdf

    def increment_cdf(self, h: Hypothesis) -> Callable[[ArrayLike], ArrayLike]:
        shape = self._shape(h)
        rho, lgr = self.rho, self._log_gamma_ratio

        def cdf(z: ArrayLike) -> ArrayLike:
            y = (np.asarray(z, dtype=float) + lgr) / rho
            with np.errstate(over="ignore"):
                out = special.gammainc(shape, np.exp(y))
            return _scalar_or_array(out, z)

        return cdf


@dataclass(frozen=True)
class ExponentialPairModel:
    """H0: Exp(mean eta0) versus H1: Exp(mean eta1) with eta1 > eta0 > 0.

    With eta_e = eta1/eta0 the increment is d = (1/eta0 - 1/eta1)*x
    - log(eta_e), a shifted exponential supported on (-log(eta_e), inf)
    under either hypothesis.
    """

    eta0: float
    eta1: float

    def __post_init__(self) -> None:
        if not (0 < self.eta0 < self.eta1) or not math.isfinite(self.eta1):
            raise ValueError(
                f"means must satisfy 0 < eta0 < eta1 < inf, got {self.eta0!r}, {self.eta1!r}"
            )

    @property
    def eta_ratio(self) -> float:
        return self.eta1 / self.eta0

    @property
    def _slope(self) -> float:
        return 1.0 / self.eta0 - 1.0 / self.eta1

    def loglik(self, x: ArrayLike) -> ArrayLike:
        arr = _as_float_array(x)
        if np.any(arr < 0):
            raise ValueError("exponential observations must be >= 0")
        d = self._slope * arr - math.log(self.eta_ratio)
        return _scalar_or_array(d, x)

    def kl_divergences(self) -> KlPair:
        eta_e = self.eta_ratio
        return KlPair(
            d10=eta_e - 1.0 - math.log(eta_e),
            d01=1.0 / eta_e - 1.0 + math.log(eta_e),
        )

    def sample(self, h: Hypothesis, rng: np.random.Generator, size=None) -> ArrayLike:
        mean = self.eta1 if h is Hypothesis.H1 else self.eta0
        return rng.exponential(mean, size)

    def sample_increments(self, h: Hypothesis, rng: np.random.Generator, size=None) -> ArrayLike:
        return self.loglik(self.sample(h, rng, size))

    def increment_moments(self, h: Hypothesis) -> tuple[float, float]:
        eta = self.eta1 if h is Hypothesis.H1 else self.eta0
        mean = self._slope * eta - math.log(self.eta_ratio)
        var = (self._slope * eta) ** 2
        return mean, var

    def _increment_scale(self, h: Hypothesis) -> float:
        # d + log(eta_e) is exponential with this mean.
        eta = self.eta1 if h is Hypothesis.H1 else self.eta0
        return self._slope * eta

    def increment_density(self, h: Hypothesis) -> Callable[[ArrayLike], ArrayLike]:
        scale = self._increment_scale(h)
        shift = math.log(self.eta_ratio)

        def pdf(z: ArrayLike) -> ArrayLike:
            t = np.asarray(z, dtype=float) + shift
            with np.errstate(over="ignore"):
                out = np.where(t > 0, np.exp(-t / scale) / scale, 0.0)
            return _scalar_or_array(out, z)

        return pdf

    def increment_cdf(self, h: Hypothesis) -> Callable[[ArrayLike], ArrayLike]:
        scale = self._increment_scale(h)
        shift = math.log(self.eta_ratio)

        def cdf(z: ArrayLike) -> ArrayLike:
            t = np.asarray(z, dtype=float) + shift
            out = np.where(t > 0, -np.expm1(-np.maximum(t, 0.0) / scale), 0.0)
            return _scalar_or_array(out, z)

        return cdf


def glrt_increment(x: ArrayLike, sigma: float) -> ArrayLike:
    """GLRT log-likelihood increment for a growth rate x with known sigma.

    d = (x-1)^2 * sign(x-1) / (2 sigma^2); odd around x = 1 and zero at
    the boundary between the two regimes.
    """
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be finite and > 0, got {sigma!r}")
    arr = _as_float_array(x)
    u = arr - 1.0
    d = u * u * np.sign(u) / (2.0 * sigma**2)
    return _scalar_or_array(d, x)


@dataclass(frozen=True)
class GlrtGaussianModel:
    """Growth-rate model with unknown regime means and known sigma.

    Only the increment map is exposed: regimes are separated by whether
    the mean growth rate is below or above 1, and the detectors are driven
    directly from observed rates.
    """

    sigma: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma!r}")

    def increment(self, x: ArrayLike) -> ArrayLike:
        return glrt_increment(x, self.sigma)


Model = Union[GaussianShiftModel, GammaPairModel, ExponentialPairModel]
