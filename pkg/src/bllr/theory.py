"""Closed-form and numerical performance prediction for the detectors.

Two families of results live here:

* Wald-approximation formulas (overshoot over the boundaries neglected)
  for Page's-test average run lengths and for the BLLR error/delay
  indexes, including the compact range form at mid-point threshold and
  the large-range operational characteristic r(delay).

* Numerical run lengths from Fredholm integral equations of the second
  kind, solved by Picard fixed-point iteration on a trapezoid grid: the
  LMS statistic's expected threshold-crossing times, and the exact Page
  ARL assembled from the coupled equations for the hit-zero probability
  p_c and the sectioned sample number E_h[n_c].

No excess-over-boundary corrections are applied anywhere; the closed
forms are exactly the Wald expressions, and their accuracy is whatever it
is (Monte Carlo and the exact solver quantify the gap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence, Union

import numpy as np

from .detectors import Hypothesis, LmsConfig
from .models import KlPair, Model

__all__ = [
    "Provenance",
    "PerformanceIndexes",
    "BllrArlIndexes",
    "FredholmProblem",
    "FredholmSolution",
    "FredholmDivergenceError",
    "DomainTruncationError",
    "IllConditionedError",
    "arl_page_wald",
    "arl_page_large_gamma",
    "bllr_indexes",
    "bllr_error_time",
    "bllr_midpoint_performance",
    "bllr_corrected_performance",
    "oc_large_r",
    "lms_mean_var",
    "fredholm_fixed_point",
    "lms_arl",
    "lms_performance",
    "page_arl_exact",
]

Provenance = Literal[
    "theory-exact-formula",
    "theory-large-R",
    "theory-corrected",
    "numerical-fredholm",
    "monte-carlo",
]


@dataclass(frozen=True)
class PerformanceIndexes:
    """Error rate r (1/steps) and expected delay (steps) with provenance."""

    rate: float
    delay: float
    provenance: str

    def __post_init__(self) -> None:
        if not (self.rate > 0):
            raise ValueError(f"rate must be > 0, got {self.rate!r}")
        if not (self.delay > 0):
            raise ValueError(f"delay must be > 0, got {self.delay!r}")


class FredholmDivergenceError(RuntimeError):
    """The Picard iteration failed to converge (or visibly diverged)."""

    def __init__(self, message: str, solution: "FredholmSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class DomainTruncationError(ValueError):
    """The truncated quadrature domain leaks too much kernel mass."""


class IllConditionedError(RuntimeError):
    """The assembled ARL is dominated by 1/(1 - p0) with p0 ~ 1."""


def _wald_rise(x: float) -> float:
    """Numerator e^x - x - 1 of the against-the-drift run length."""
    return math.exp(x) - x - 1.0


def _wald_drift(x: float) -> float:
    """Numerator x + e^{-x} - 1 of the with-the-drift run length."""
    return x + math.exp(-x) - 1.0


def arl_page_wald(gamma_p: float, kl: KlPair, hypothesis: Hypothesis) -> float:
    """Wald-approximation ARL of Page's test started at 0.

    Under H0 (statistic drifting down, reflected at 0) the mean time to a
    false crossing of gamma_p is (e^g - g - 1)/D01; under H1 it is the
    worst mean detection delay (g + e^{-g} - 1)/D10.
    """
    if not (gamma_p > 0):
        raise ValueError(f"gamma_p must be > 0, got {gamma_p!r}")
    if hypothesis is Hypothesis.H0:
        return _wald_rise(gamma_p) / kl.d01
    return _wald_drift(gamma_p) / kl.d10


def arl_page_large_gamma(gamma_p: float, kl: KlPair, hypothesis: Hypothesis) -> float:
    """Large-threshold simplification: e^g/D01 under H0, g/D10 under H1."""
    if not (gamma_p > 0):
        raise ValueError(f"gamma_p must be > 0, got {gamma_p!r}")
    if hypothesis is Hypothesis.H0:
        return math.exp(gamma_p) / kl.d01
    return gamma_p / kl.d10


@dataclass(frozen=True)
class BllrArlIndexes:
    """The four Wald run lengths that define the BLLR operational indexes.

    false_cross_h0:  T0(-a; gamma), time to a wrong H1 decision under H0
                     starting from the lower barrier.
    false_cross_h1:  T1(b; gamma), time to a wrong H0 decision under H1
                     starting from the upper barrier.
    transit_h1:      T1(-a; b), barrier-to-barrier delay after a switch
                     to H1.
    transit_h0:      T0(b; -a), barrier-to-barrier delay after a switch
                     to H0.
    """

    false_cross_h0: float
    false_cross_h1: float
    transit_h1: float
    transit_h0: float

    @property
    def error_time(self) -> float:
        return 0.5 * (self.false_cross_h0 + self.false_cross_h1)

    @property
    def rate(self) -> float:
        return 1.0 / self.error_time

    @property
    def delay(self) -> float:
        return 0.5 * (self.transit_h1 + self.transit_h0)

    def performance(self, provenance: str = "theory-exact-formula") -> PerformanceIndexes:
        return PerformanceIndexes(rate=self.rate, delay=self.delay, provenance=provenance)


def bllr_indexes(
    lower_barrier: float,
    upper_barrier: float,
    threshold: float,
    kl: KlPair,
) -> BllrArlIndexes:
    """Wald run lengths between the typical levels -a, b and the threshold.

    By the reduction of the clipped walk to forward/reversed Page's tests:
        T0(-a; gamma) = (e^{gamma+a} - (gamma+a) - 1)/D01
        T1(b; gamma)  = (e^{b-gamma} - (b-gamma) - 1)/D10
        T1(-a; b)     = ((b+a) + e^{-(b+a)} - 1)/D10
        T0(b; -a)     = ((b+a) + e^{-(b+a)} - 1)/D01
    """
    a, b, g = lower_barrier, upper_barrier, threshold
    if not (-a < g < b):
        raise ValueError(f"threshold must lie in (-a, b), got {g!r}")
    span = b + a
    return BllrArlIndexes(
        false_cross_h0=_wald_rise(g + a) / kl.d01,
        false_cross_h1=_wald_rise(b - g) / kl.d10,
        transit_h1=_wald_drift(span) / kl.d10,
        transit_h0=_wald_drift(span) / kl.d01,
    )


def bllr_error_time(range_: float, d_eff: float) -> float:
    """Mid-point-threshold expected error time (e^{R/2} - R/2 - 1)/D_eff."""
    if not (range_ > 0 and d_eff > 0):
        raise ValueError("range and effective divergence must be > 0")
    return _wald_rise(range_ / 2.0) / d_eff


def bllr_midpoint_performance(range_: float, d_eff: float) -> PerformanceIndexes:
    """Rate and delay as functions of the range R = a + b alone.

    Valid at the mid-point threshold gamma = (b - a)/2, where both error
    legs have length R/2:
        r = D_eff / (e^{R/2} - R/2 - 1),  delay = (R + e^{-R} - 1)/D_eff.
    """
    t_err = bllr_error_time(range_, d_eff)
    return PerformanceIndexes(
        rate=1.0 / t_err,
        delay=_wald_drift(range_) / d_eff,
        provenance="theory-exact-formula",
    )


def bllr_corrected_performance(
    level_h0: float,
    level_h1: float,
    threshold: float,
    kl: KlPair,
) -> PerformanceIndexes:
    """Same formulas with the barriers replaced by typical statistic levels.

    ``level_h0`` and ``level_h1`` are estimates of the stationary means of
    the clipped statistic under H0 and H1 (level_h0 < threshold <
    level_h1), giving a comparison on the same footing as the LMS indexes.
    """
    if not (level_h0 < threshold < level_h1):
        raise ValueError("levels must straddle the threshold")
    idx = bllr_indexes(-level_h0, level_h1, threshold, kl)
    return idx.performance(provenance="theory-corrected")


def oc_large_r(d_eff: float, delay: float) -> float:
    """Large-range operational characteristic r = D_eff e^{-D_eff*delay/2}.

    Strictly decreasing and convex in the delay; equals D_eff at zero
    delay.
    """
    if not (d_eff > 0):
        raise ValueError(f"d_eff must be > 0, got {d_eff!r}")
    if delay < 0:
        raise ValueError(f"delay must be >= 0, got {delay!r}")
    return d_eff * math.exp(-d_eff * delay / 2.0)


def lms_mean_var(
    i: float,
    step_size: float,
    mean_d: float,
    var_d: float,
) -> tuple[float, float]:
    """Transient mean and variance of the LMS statistic after i steps.

    mean = [1 - (1-mu)^i] mean_d, var = [1 - (1-mu)^{2i}] mu/(2-mu) var_d;
    i = math.inf gives the stationary values.
    """
    mu = step_size
    if not (0 < mu <= 1):
        raise ValueError(f"step_size must be in (0, 1], got {mu!r}")
    if i < 0:
        raise ValueError(f"step count must be >= 0, got {i!r}")
    c = 1.0 - mu
    mean = (1.0 - c**i) * mean_d
    var = (1.0 - c ** (2 * i)) * mu / (2.0 - mu) * var_d
    return mean, var


# ---------------------------------------------------------------------------
# Fredholm machinery
# ---------------------------------------------------------------------------


@dataclass
class FredholmProblem:
    """A second-kind Fredholm equation g(x) = inhom(x) + int K(x, xi) g(xi) dxi.

    Two kernel forms built from an increment density f_d:

        kernel="ewma":  K(x, xi) = (1/mu) f_d((xi - (1-mu) x)/mu)
        kernel="shift": K(x, xi) = f_d(xi - x)

    The domain is the closed interval [lower, upper]; ``lower`` may be
    ``-inf`` as a marker that the equation is semi-infinite and must be
    truncated before solving. ``cdf``, when given, lets the solver bound
    the kernel mass leaking below the truncation point.
    """

    density: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float
    step_size: float = 1.0
    kernel: Literal["ewma", "shift"] = "ewma"
    inhomogeneous: Union[float, Callable[[np.ndarray], np.ndarray]] = 1.0
    cdf: Callable[[np.ndarray], np.ndarray] | None = None

    def kernel_matrix(self, grid: np.ndarray) -> np.ndarray:
        h = grid[1] - grid[0]
        weights = np.full(grid.size, h)
        weights[0] = weights[-1] = h / 2.0
        if self.kernel == "ewma":
            mu = self.step_size
            args = (grid[None, :] - (1.0 - mu) * grid[:, None]) / mu
            return weights[None, :] * self.density(args) / mu
        if self.kernel == "shift":
            return weights[None, :] * self.density(grid[None, :] - grid[:, None])
        raise ValueError(f"unknown kernel form {self.kernel!r}")

    def exact_row_mass(self, grid: np.ndarray) -> np.ndarray | None:
        """In-domain transition mass per row from the CDF, when available.

        Comparing this with the quadrature row sums exposes kernels the
        grid cannot resolve (the failure mode of discontinuous increment
        densities).
        """
        if self.cdf is None:
            return None
        lo, hi = grid[0], grid[-1]
        if self.kernel == "ewma":
            mu = self.step_size
            shifted = (1.0 - mu) * grid
            return np.asarray(self.cdf((hi - shifted) / mu), dtype=float) - np.asarray(
                self.cdf((lo - shifted) / mu), dtype=float
            )
        return np.asarray(self.cdf(hi - grid), dtype=float) - np.asarray(
            self.cdf(lo - grid), dtype=float
        )

    def inhomogeneous_on(self, grid: np.ndarray) -> np.ndarray:
        if callable(self.inhomogeneous):
            return np.asarray(self.inhomogeneous(grid), dtype=float)
        return np.full(grid.size, float(self.inhomogeneous))


@dataclass
class FredholmSolution:
    """Fixed-point result with the per-iteration residual history."""

    grid: np.ndarray
    values: np.ndarray
    converged: bool
    iterations: int
    residuals: np.ndarray
    status: str = "converged"
    row_mass_error: float = 0.0

    def __call__(self, x: float | np.ndarray) -> float | np.ndarray:
        return np.interp(x, self.grid, self.values)


def fredholm_fixed_point(
    problem: FredholmProblem,
    grid: Union[int, np.ndarray],
    g0: Union[float, np.ndarray],
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> FredholmSolution:
    """Picard iteration g_n = inhom + K g_{n-1} up to convergence, if any.

    ``grid`` is either a uniform array covering [lower, upper] or a point
    count for ``linspace``. The iteration stops when the relative sup-norm
    of successive differences falls below ``tol``; a visibly growing
    residual or an exploding iterate is reported as status "diverged",
    exhaustion of ``max_iter`` as "max-iterations". Nothing is raised
    here: callers decide whether a non-converged status is an error.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    if isinstance(grid, (int, np.integer)):
        if not (math.isfinite(problem.lower) and math.isfinite(problem.upper)):
            raise ValueError("semi-infinite problem: truncate the domain before solving")
        grid = np.linspace(problem.lower, problem.upper, int(grid))
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3 or not np.allclose(np.diff(grid), grid[1] - grid[0], rtol=1e-9):
        raise ValueError("grid must be a uniform array with at least 3 points")

    kernel = problem.kernel_matrix(grid)
    inhom = problem.inhomogeneous_on(grid)
    g = np.full(grid.size, float(g0)) if np.isscalar(g0) else np.asarray(g0, dtype=float).copy()

    row_mass_error = 0.0
    exact_mass = problem.exact_row_mass(grid)
    if exact_mass is not None:
        row_mass_error = float(np.max(np.abs(kernel.sum(axis=1) - exact_mass)))
        if row_mass_error > 1e-3:
            # Iterating an unresolved kernel produces confidently wrong
            # numbers (a spurious fixed point), so refuse up front.
            return FredholmSolution(
                grid=grid,
                values=g,
                converged=False,
                iterations=0,
                residuals=np.asarray([]),
                status="kernel-unresolved",
                row_mass_error=row_mass_error,
            )

    residuals: list[float] = []
    status = "max-iterations"
    converged = False
    for iteration in range(1, max_iter + 1):
        g_next = inhom + kernel @ g
        scale = max(float(np.max(np.abs(g_next))), 1e-300)
        residual = float(np.max(np.abs(g_next - g))) / scale
        residuals.append(residual)
        g = g_next
        if residual <= tol:
            status = "converged"
            converged = True
            break
        if scale > 1e15 or (
            len(residuals) > 50
            and residuals[-1] > 10.0 * residuals[-50]
            and residuals[-1] > residuals[0]
        ):
            status = "diverged"
            break

    return FredholmSolution(
        grid=grid,
        values=g,
        converged=converged,
        iterations=len(residuals),
        residuals=np.asarray(residuals),
        status=status,
        row_mass_error=row_mass_error,
    )


def _reflected_density(density: Callable) -> Callable:
    def pdf(z):
        return density(-np.asarray(z, dtype=float))

    return pdf


def _reflected_cdf(cdf: Callable) -> Callable:
    def reflected(z):
        return 1.0 - np.asarray(cdf(-np.asarray(z, dtype=float)), dtype=float)

    return reflected


def _pilot_run_length(
    model: Model,
    hypothesis: Hypothesis,
    step_size: float,
    start: float,
    target: float,
    direction: str,
    runs: int,
    seed: int,
) -> float:
    """Cheap Monte Carlo estimate used as the constant initial guess."""
    from . import montecarlo  # local import: montecarlo does not import theory

    config = LmsConfig(step_size=step_size)
    total = 0
    for k in range(runs):
        rng = montecarlo.run_stream(seed, k, label="fredholm-pilot")
        sample = montecarlo.hitting_time(
            config, model, hypothesis, start, target, direction, rng, cap=10_000_000
        )
        total += sample.steps
    return total / runs


def lms_arl(
    model: Model,
    hypothesis: Hypothesis,
    step_size: float,
    start: float,
    target: float,
    direction: str = "upcross",
    *,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    pilot_runs: int = 100,
    seed: int = 0,
) -> float:
    """Expected first-crossing time of the LMS statistic via the integral equation.

    Solves g(x) = 1 + (1/mu) int_lo^target g(xi) f_d((xi - (1-mu)x)/mu) dxi
    on a truncated domain and evaluates at ``start``. Downcross queries are
    mapped to upcrosses of the sign-reversed process. The truncation point
    sits 10 stationary standard deviations below the stationary mean and is
    widened until the answer stops moving; leaked kernel mass beyond 1e-6
    raises DomainTruncationError, and a non-convergent iteration raises
    FredholmDivergenceError (a real outcome for heavy-tailed increment
    laws, not a bug to be papered over).
    """
    mu = step_size
    if not (0 < mu <= 1):
        raise ValueError(f"step_size must be in (0, 1], got {mu!r}")
    if direction not in ("upcross", "downcross"):
        raise ValueError(f"direction must be 'upcross' or 'downcross', got {direction!r}")
    if direction == "upcross" and not (start < target):
        raise ValueError(f"upcross requires start < target, got {start!r} >= {target!r}")
    if direction == "downcross" and not (start > target):
        raise ValueError(f"downcross requires start > target, got {start!r} <= {target!r}")

    pilot = _pilot_run_length(
        model, hypothesis, mu, start, target, direction, pilot_runs, seed
    )

    density = model.increment_density(hypothesis)
    cdf = model.increment_cdf(hypothesis)
    mean_d, var_d = model.increment_moments(hypothesis)
    if direction == "downcross":
        density = _reflected_density(density)
        cdf = _reflected_cdf(cdf)
        mean_d = -mean_d
        start, target = -start, -target

    sd_d = math.sqrt(var_d)
    sd_stat = math.sqrt(mu / (2.0 - mu) * var_d)
    lo = min(mean_d - 10.0 * sd_stat, start - 3.0 * mu * sd_d)
    h = 0.3 * mu * sd_d
    h = min(h, (target - lo) / 100.0)

    def solve(lo_point: float) -> FredholmSolution:
        leak = float(np.max(cdf(np.asarray([
            (lo_point - (1.0 - mu) * start) / mu,
            (lo_point - (1.0 - mu) * max(lo_point, mean_d - 6.0 * sd_stat)) / mu,
        ]))))
        if leak > 1e-6:
            raise DomainTruncationError(
                f"kernel mass {leak:.2e} below truncation point {lo_point:.4g} "
                "exceeds 1e-6; quadrature domain too small"
            )
        n = min(int(round((target - lo_point) / h)) + 1, 20_000)
        grid = target - h * np.arange(n - 1, -1, -1.0)
        problem = FredholmProblem(
            density=density, lower=float(grid[0]), upper=target, step_size=mu, kernel="ewma"
        )
        solution = fredholm_fixed_point(problem, grid, g0=pilot, tol=tol, max_iter=max_iter)
        if not solution.converged:
            raise FredholmDivergenceError(
                f"Picard iteration {solution.status} after {solution.iterations} "
                f"iterations (last residual {solution.residuals[-1]:.3e})",
                solution,
            )
        return solution

    solution = solve(lo)
    value = float(solution(start))
    # Widen by whole grid cells (the node set only gains points, so the
    # comparison isolates the truncation effect from re-discretization).
    widen_by = math.ceil(5.0 * sd_stat / h) * h
    for _ in range(3):
        lo -= widen_by
        wider = solve(lo)
        new_value = float(wider(start))
        moved = abs(new_value - value) / max(abs(new_value), 1e-300)
        solution, value = wider, new_value
        if moved <= max(100.0 * tol, 1e-4):
            return value
    raise DomainTruncationError(
        "run length still changing after repeated domain widening; "
        "truncated domain cannot be validated"
    )


def lms_performance(
    model: Model,
    step_size: float,
    threshold: float | None = None,
    *,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    seed: int = 0,
) -> PerformanceIndexes:
    """Numerical-Fredholm rate and delay of the LMS test.

    The statistic's typical levels are the stationary means -D01 and D10,
    so r' = 2/[T'0(-D01; g) + T'1(D10; g)] and the delay averages the two
    level-to-level transits. ``threshold`` defaults to the mid-point
    (D10 - D01)/2.
    """
    kl = model.kl_divergences()
    if threshold is None:
        threshold = 0.5 * (kl.d10 - kl.d01)
    if not (-kl.d01 < threshold < kl.d10):
        raise ValueError(f"threshold must lie in (-D01, D10), got {threshold!r}")
    kwargs = dict(tol=tol, max_iter=max_iter, seed=seed)
    t_false_h0 = lms_arl(
        model, Hypothesis.H0, step_size, -kl.d01, threshold, "upcross", **kwargs
    )
    t_false_h1 = lms_arl(
        model, Hypothesis.H1, step_size, kl.d10, threshold, "downcross", **kwargs
    )
    t_rise = lms_arl(
        model, Hypothesis.H1, step_size, -kl.d01, kl.d10, "upcross", **kwargs
    )
    t_fall = lms_arl(
        model, Hypothesis.H0, step_size, kl.d10, -kl.d01, "downcross", **kwargs
    )
    return PerformanceIndexes(
        rate=2.0 / (t_false_h0 + t_false_h1),
        delay=0.5 * (t_rise + t_fall),
        provenance="numerical-fredholm",
    )


def page_arl_exact(
    start: float,
    threshold: float,
    model: Model,
    hypothesis: Hypothesis,
    *,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    grid_points: int | None = None,
) -> float:
    """Exact Page's-test ARL L_h(c; gamma_P) from the coupled Fredholm equations.

    On [0, gamma_P] the hit-zero probability and the sectioned sample
    number solve

        p_c     = F_d(-c) + int_0^g p_xi f_d(xi - c) dxi
        E_h n_c = 1       + int_0^g E_h n_xi f_d(xi - c) dxi

    and the ARL assembles as L(c) = p_c L(0) + E n_c with
    L(0) = E n_0 / (1 - p_0). Exact up to quadrature, no overshoot
    approximation. Starting points outside [0, gamma_P] are rejected.
    """
    if not (threshold > 0):
        raise ValueError(f"threshold must be > 0, got {threshold!r}")
    if not (0.0 <= start <= threshold):
        raise ValueError(
            f"start must lie in [0, threshold] = [0, {threshold}], got {start!r}"
        )
    density = model.increment_density(hypothesis)
    cdf = model.increment_cdf(hypothesis)
    _, var_d = model.increment_moments(hypothesis)
    sd_d = math.sqrt(var_d)

    if grid_points is None:
        h = min(sd_d / 20.0, threshold / 100.0)
        grid_points = min(int(math.ceil(threshold / h)) + 1, 4_000)
    grid = np.linspace(0.0, threshold, grid_points)

    base = dict(density=density, lower=0.0, upper=threshold, kernel="shift")
    prob_hit_zero = FredholmProblem(
        inhomogeneous=lambda c: np.asarray(cdf(-c), dtype=float), **base
    )
    mean_cycle = FredholmProblem(inhomogeneous=1.0, **base)

    p_sol = fredholm_fixed_point(prob_hit_zero, grid, g0=0.5, tol=tol, max_iter=max_iter)
    n_sol = fredholm_fixed_point(mean_cycle, grid, g0=1.0, tol=tol, max_iter=max_iter)
    for sol, name in ((p_sol, "p_c"), (n_sol, "E_h n_c")):
        if not sol.converged:
            raise FredholmDivergenceError(
                f"{name} iteration {sol.status} after {sol.iterations} iterations",
                sol,
            )

    p0 = float(p_sol.values[0])
    if p0 >= 1.0 - 1e-12:
        raise IllConditionedError(
            f"p_0 = {p0!r} is too close to 1; the assembled ARL is ill-conditioned"
        )
    arl_from_zero = float(n_sol.values[0]) / (1.0 - p0)
    return float(p_sol(start)) * arl_from_zero + float(n_sol(start))
