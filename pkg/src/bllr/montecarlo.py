"""Seeded Monte Carlo harness for hitting times and operational curves.

Every estimate is a deterministic function of its inputs and an integer
seed: each simulated run owns an independent counter-based Philox stream
keyed by (seed, run index), so serial and parallel execution, and any
re-ordering of runs, give identical results.

Hitting times are simulated in vectorized blocks. The two-barrier BLLR
walk reduces exactly to a one-sided reflected walk for every crossing
query used here (before the first crossing of the target, the far barrier
is the only active clip), and the reflected walk has the closed Lindley
form y_n = S_n + max(y_0, -min_k S_k) over the partial sums, so no
per-step Python loop is needed. The LMS recursion is unrolled blockwise
through its geometric representation.

Runs censored at the step cap are reported through ``censored_fraction``
and flag the estimate as biased; an estimate with every run censored is
an error, not a number.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate, stats

from .detectors import (
    BllrConfig,
    DetectorConfig,
    Hypothesis,
    LmsConfig,
    PageConfig,
    PageSign,
)
from .models import Model, glrt_increment

__all__ = [
    "HittingTimeSample",
    "SweepSpec",
    "CurvePoint",
    "OperationalCurve",
    "EmpiricalIndexes",
    "CensoredEstimateError",
    "run_stream",
    "hitting_time",
    "empirical_indexes",
    "stationary_mean",
    "oc_sweep",
    "glrt_oc",
    "glrt_mean_increment",
    "sprt_stopped_exp_mean",
]

DEFAULT_STEP_CAP = 10_000_000

Drawer = Callable[[int], np.ndarray]


class CensoredEstimateError(RuntimeError):
    """Every run of a hitting-time estimate was censored at the step cap."""


@dataclass(frozen=True)
class HittingTimeSample:
    """One simulated first-crossing time; censored means the cap was hit."""

    steps: int
    censored: bool

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grid, replication count, seed and step cap for a sweep."""

    grid: tuple[float, ...]
    runs: int = 1000
    seed: int = 0
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if len(self.grid) == 0:
            raise ValueError("parameter grid must be nonempty")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs!r}")
        if self.step_cap < 1:
            raise ValueError(f"step_cap must be >= 1, got {self.step_cap!r}")


@dataclass(frozen=True)
class CurvePoint:
    """One (delay, rate) point of an operational characteristic."""

    parameter: float
    delay: float
    rate: float
    provenance: str
    censored_fraction: float


@dataclass
class OperationalCurve:
    """Operational characteristic: points ordered by delay, one provenance.

    Failed grid points are kept aside as (parameter, reason) pairs so a
    sweep survives individual failures without hiding them.
    """

    points: list[CurvePoint]
    provenance: str
    failures: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for p in self.points:
            if p.provenance != self.provenance:
                raise ValueError("all points of a curve must share its provenance")
        self.points.sort(key=lambda p: p.delay)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    def to_rows(self) -> list[dict]:
        return [
            {
                "parameter": p.parameter,
                "delta": p.delay,
                "rate": p.rate,
                "provenance": p.provenance,
                "censored_fraction": p.censored_fraction,
            }
            for p in self.points
        ]


def run_stream(seed, index: int, label: str = "run") -> np.random.Generator:
    """Independent Philox stream for one run index.

    Streams are keyed by (label, seed, index) through a SeedSequence, so
    any run can be regenerated in isolation and execution order never
    matters.
    """
    if isinstance(seed, (int, np.integer)):
        seed_key: tuple = (int(seed),)
    else:
        seed_key = tuple(int(s) for s in seed)
    entropy = (zlib.crc32(label.encode()),) + seed_key + (int(index),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


# ---------------------------------------------------------------------------
# blockwise first-crossing kernels
# ---------------------------------------------------------------------------

_BLOCK_START = 256
_BLOCK_MAX = 8192


def _first_reflected_crossing(
    draw: Drawer, y0: float, threshold: float, cap: int
) -> tuple[int, bool]:
    """First i >= 1 with y(i) >= threshold for y(i) = max(0, y(i-1) + d(i))."""
    done = 0
    carry = y0
    block = _BLOCK_START
    while done < cap:
        n = min(block, cap - done)
        d = draw(n)
        s = np.cumsum(d)
        y = s + np.maximum(carry, -np.minimum.accumulate(s))
        hits = np.nonzero(y >= threshold)[0]
        if hits.size:
            return done + int(hits[0]) + 1, False
        carry = float(y[-1])
        done += n
        block = min(block * 2, _BLOCK_MAX)
    return cap, True


def _first_walk_crossing(
    draw: Drawer, y0: float, threshold: float, cap: int
) -> tuple[int, bool]:
    """First i >= 1 with y0 + S_i >= threshold for the plain walk."""
    done = 0
    carry = y0
    block = _BLOCK_START
    while done < cap:
        n = min(block, cap - done)
        y = carry + np.cumsum(draw(n))
        hits = np.nonzero(y >= threshold)[0]
        if hits.size:
            return done + int(hits[0]) + 1, False
        carry = float(y[-1])
        done += n
        block = min(block * 2, _BLOCK_MAX)
    return cap, True


def _first_ewma_crossing(
    draw: Drawer, w0: float, mu: float, target: float, upward: bool, cap: int
) -> tuple[int, bool]:
    """First i >= 1 with w(i) >=/<= target for w(i) = mu d(i) + (1-mu) w(i-1).

    Within a block, w(j) = c^j (w0 + mu sum_k c^{-k} d(k)) with c = 1-mu;
    the block length is capped so c^{-k} stays far from overflow.
    """
    c = 1.0 - mu
    if c <= 0.0:
        block_cap = _BLOCK_MAX
    else:
        block_cap = max(16, min(_BLOCK_MAX, int(300.0 / -math.log(c))))
    done = 0
    carry = w0
    block = min(_BLOCK_START, block_cap)
    while done < cap:
        n = min(block, cap - done)
        d = draw(n)
        if c <= 0.0:
            w = d  # mu == 1: memoryless
        else:
            k = np.arange(1, n + 1, dtype=float)
            decay = c**k
            w = decay * (carry + mu * np.cumsum(d / decay))
        hits = np.nonzero(w >= target if upward else w <= target)[0]
        if hits.size:
            return done + int(hits[0]) + 1, False
        carry = float(w[-1])
        done += n
        block = min(block * 2, block_cap)
    return cap, True


def _model_drawer(model: Model, hypothesis: Hypothesis, rng: np.random.Generator) -> Drawer:
    def draw(n: int) -> np.ndarray:
        return np.asarray(model.sample_increments(hypothesis, rng, n), dtype=float)

    return draw


def _check_direction(start: float, target: float, direction: str) -> None:
    if direction not in ("upcross", "downcross"):
        raise ValueError(f"direction must be 'upcross' or 'downcross', got {direction!r}")
    if direction == "upcross" and not (start < target):
        raise ValueError(f"upcross requires start < target, got {start!r} >= {target!r}")
    if direction == "downcross" and not (start > target):
        raise ValueError(f"downcross requires start > target, got {start!r} <= {target!r}")


def _hitting_time_from_drawer(
    config: DetectorConfig,
    draw: Drawer,
    start: float,
    target: float,
    direction: str,
    cap: int,
) -> tuple[int, bool]:
    _check_direction(start, target, direction)
    if isinstance(config, BllrConfig):
        a, b = config.lower_barrier, config.upper_barrier
        if direction == "upcross":
            if target > b:
                raise ValueError(f"target {target!r} lies beyond the upper barrier {b!r}")
            if math.isinf(a):
                return _first_walk_crossing(draw, start, target, cap)
            return _first_reflected_crossing(draw, start + a, target + a, cap)
        if target < -a:
            raise ValueError(f"target {target!r} lies beyond the lower barrier {-a!r}")
        reversed_draw: Drawer = lambda n: -draw(n)
        if math.isinf(b):
            return _first_walk_crossing(reversed_draw, -start, -target, cap)
        return _first_reflected_crossing(reversed_draw, b - start, b - target, cap)
    if isinstance(config, PageConfig):
        if start < 0 or target < 0:
            raise ValueError("Page statistic levels must be >= 0")
        signed: Drawer = draw if config.sign is PageSign.FORWARD else (lambda n: -draw(n))
        if direction == "upcross":
            return _first_reflected_crossing(signed, start, target, cap)
        # From above, the reflection at 0 cannot trigger before the target
        # (>= 0) is reached, so the query is a plain-walk crossing.
        flipped: Drawer = lambda n: -signed(n)
        return _first_walk_crossing(flipped, -start, -target, cap)
    if isinstance(config, LmsConfig):
        return _first_ewma_crossing(
            draw, start, config.step_size, target, direction == "upcross", cap
        )
    raise TypeError(f"unsupported detector config: {config!r}")


def hitting_time(
    config: DetectorConfig,
    model: Model,
    hypothesis: Hypothesis,
    start: float,
    target: float,
    direction: str,
    rng: np.random.Generator,
    cap: int = DEFAULT_STEP_CAP,
) -> HittingTimeSample:
    """Simulate one first-crossing time of the detector statistic.

    The crossing condition is non-strict (>= target for an upcross,
    <= target for a downcross) and counting starts at i = 1. Runs that
    have not crossed after ``cap`` steps come back censored.
    """
    draw = _model_drawer(model, hypothesis, rng)
    steps, censored = _hitting_time_from_drawer(config, draw, start, target, direction, cap)
    return HittingTimeSample(steps=steps, censored=censored)


# ---------------------------------------------------------------------------
# empirical performance indexes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalIndexes:
    """Monte Carlo rate/delay estimate with censoring transparency.

    ``quantity_means`` holds the four mean hitting times behind the
    indexes; standard errors are propagated to the rate and delay by the
    delta method.
    """

    rate: float
    delay: float
    provenance: str
    censored_fraction: float
    rate_se: float
    delay_se: float
    runs: int
    quantity_means: dict[str, float]
    quantity_ses: dict[str, float]

    @property
    def biased(self) -> bool:
        """True when censoring truncated some runs (estimates biased low)."""
        return self.censored_fraction > 0.0


def _bllr_quantities(config: BllrConfig) -> list[tuple[str, Hypothesis, float, float, str]]:
    a, b, g = config.lower_barrier, config.upper_barrier, config.threshold
    if math.isinf(a) or math.isinf(b):
        raise ValueError("error/delay indexes need two finite barriers")
    if not (-a < g < b):
        raise ValueError(f"threshold must lie strictly inside (-a, b), got {g!r}")
    return [
        ("false_cross_h0", Hypothesis.H0, -a, g, "upcross"),
        ("false_cross_h1", Hypothesis.H1, b, g, "downcross"),
        ("transit_h1", Hypothesis.H1, -a, b, "upcross"),
        ("transit_h0", Hypothesis.H0, b, -a, "downcross"),
    ]


def _lms_quantities(
    config: LmsConfig, level_h0: float, level_h1: float
) -> list[tuple[str, Hypothesis, float, float, str]]:
    g = config.threshold
    if not (level_h0 < g < level_h1):
        raise ValueError(
            f"threshold must lie strictly between the levels ({level_h0}, {level_h1}), got {g!r}"
        )
    return [
        ("false_cross_h0", Hypothesis.H0, level_h0, g, "upcross"),
        ("false_cross_h1", Hypothesis.H1, level_h1, g, "downcross"),
        ("transit_h1", Hypothesis.H1, level_h0, level_h1, "upcross"),
        ("transit_h0", Hypothesis.H0, level_h1, level_h0, "downcross"),
    ]


def _indexes_from_drawers(
    config: DetectorConfig,
    drawer_factory: Callable[[Hypothesis, np.random.Generator], Drawer],
    quantities: list[tuple[str, Hypothesis, float, float, str]],
    runs: int,
    seed,
    cap: int,
) -> EmpiricalIndexes:
    means: dict[str, float] = {}
    ses: dict[str, float] = {}
    censored_total = 0
    for qi, (label, hyp, start, target, direction) in enumerate(quantities):
        steps = np.empty(runs, dtype=float)
        censored = 0
        for k in range(runs):
            rng = run_stream(seed, qi * runs + k, label="indexes")
            draw = drawer_factory(hyp, rng)
            n, was_censored = _hitting_time_from_drawer(
                config, draw, start, target, direction, cap
            )
            steps[k] = n
            censored += was_censored
        if censored == runs:
            raise CensoredEstimateError(
                f"all {runs} runs of {label} were censored at cap {cap}"
            )
        censored_total += censored
        means[label] = float(steps.mean())
        ses[label] = float(steps.std(ddof=1) / math.sqrt(runs)) if runs > 1 else float("inf")

    t_err = 0.5 * (means["false_cross_h0"] + means["false_cross_h1"])
    rate = 1.0 / t_err
    rate_se = (
        0.5 * rate**2 * math.hypot(ses["false_cross_h0"], ses["false_cross_h1"])
        if runs > 1
        else float("inf")
    )
    delay = 0.5 * (means["transit_h1"] + means["transit_h0"])
    delay_se = (
        0.5 * math.hypot(ses["transit_h1"], ses["transit_h0"]) if runs > 1 else float("inf")
    )
    return EmpiricalIndexes(
        rate=rate,
        delay=delay,
        provenance="monte-carlo",
        censored_fraction=censored_total / (len(quantities) * runs),
        rate_se=rate_se,
        delay_se=delay_se,
        runs=runs,
        quantity_means=means,
        quantity_ses=ses,
    )


def empirical_indexes(
    config: DetectorConfig,
    model: Model,
    runs: int,
    seed,
    cap: int = DEFAULT_STEP_CAP,
) -> EmpiricalIndexes:
    """Estimate (rate, delay) for a BLLR or LMS configuration.

    BLLR anchors are the barriers themselves; LMS anchors are the
    stationary means -D01 and D10 of the statistic under the two
    hypotheses. The rate is 2/(mean false-crossing times), the delay the
    mean of the two level-to-level transit times.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs!r}")
    if isinstance(config, BllrConfig):
        quantities = _bllr_quantities(config)
    elif isinstance(config, LmsConfig):
        kl = model.kl_divergences()
        quantities = _lms_quantities(config, -kl.d01, kl.d10)
    else:
        raise TypeError(f"error/delay indexes are defined for BLLR and LMS, got {config!r}")

    def factory(hyp: Hypothesis, rng: np.random.Generator) -> Drawer:
        return _model_drawer(model, hyp, rng)

    return _indexes_from_drawers(config, factory, quantities, runs, seed, cap)


# ---------------------------------------------------------------------------
# stationary levels, sweeps, GLRT experiment
# ---------------------------------------------------------------------------


def stationary_mean(
    config: DetectorConfig,
    model: Model,
    hypothesis: Hypothesis,
    burn_in: int,
    horizon: int,
    seed,
    runs: int = 8,
) -> float:
    """Time-and-ensemble average of the statistic after a burn-in.

    Estimates the stationary mean E_h[z(inf)] (or E_h[w(inf)]) by
    averaging the statistic over steps burn_in+1..horizon across ``runs``
    independent trajectories started from zero.
    """
    if not (0 <= burn_in < horizon):
        raise ValueError(f"need 0 <= burn_in < horizon, got {burn_in!r}, {horizon!r}")
    total = 0.0
    for k in range(runs):
        rng = run_stream(seed, k, label="stationary")
        d = np.asarray(model.sample_increments(hypothesis, rng, horizon), dtype=float)
        if isinstance(config, LmsConfig):
            mu = config.step_size
            w = 0.0
            acc = 0.0
            for i in range(horizon):
                w = mu * d[i] + (1.0 - mu) * w
                if i >= burn_in:
                    acc += w
        elif isinstance(config, BllrConfig):
            lo = 0.0 - config.lower_barrier
            hi = config.upper_barrier
            z = 0.0
            acc = 0.0
            for i in range(horizon):
                z = min(hi, max(lo, z + d[i]))
                if i >= burn_in:
                    acc += z
        elif isinstance(config, PageConfig):
            s = 1.0 if config.sign is PageSign.FORWARD else -1.0
            z = 0.0
            acc = 0.0
            for i in range(horizon):
                z = max(0.0, z + s * d[i])
                if i >= burn_in:
                    acc += z
        else:
            raise TypeError(f"unsupported detector config: {config!r}")
        total += acc / (horizon - burn_in)
    return total / runs


def _sweep_config(family: str, parameter: float, model: Model) -> DetectorConfig:
    kl = model.kl_divergences()
    if family == "lms":
        return LmsConfig(step_size=parameter, threshold=0.5 * (kl.d10 - kl.d01))
    if family == "bllr":
        # Symmetric pairs use a = b = D/mu; asymmetric pairs scale each
        # barrier by its own divergence, keeping the mid-point threshold.
        if math.isclose(kl.d10, kl.d01, rel_tol=1e-12):
            a = b = kl.d10 / parameter
        else:
            a, b = kl.d01 / parameter, kl.d10 / parameter
        return BllrConfig(lower_barrier=a, upper_barrier=b, threshold=0.5 * (b - a))
    raise ValueError(f"detector family must be 'bllr' or 'lms', got {family!r}")


def oc_sweep(
    spec: SweepSpec,
    family: Literal["bllr", "lms"],
    model: Model,
    threads: int = 1,
    config_builder: Callable[[float], DetectorConfig] | None = None,
) -> OperationalCurve:
    """Operational-characteristic sweep over an adaptation-speed grid.

    Each grid value is a step size mu; BLLR barriers follow the matched
    rule a = b = D/mu (or a = D01/mu, b = D10/mu for asymmetric pairs)
    with the mid-point threshold, unless ``config_builder`` supplies a
    custom parameter-to-config mapping. Failures of individual points are
    recorded and the sweep continues.
    """

    def one_point(i: int) -> tuple[float, EmpiricalIndexes | Exception]:
        parameter = spec.grid[i]
        try:
            if config_builder is not None:
                config = config_builder(parameter)
            else:
                config = _sweep_config(family, parameter, model)
            est = empirical_indexes(
                config, model, spec.runs, seed=(spec.seed, i), cap=spec.step_cap
            )
            return parameter, est
        except Exception as exc:  # recorded per point, sweep continues
            return parameter, exc

    indices = range(len(spec.grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_point, indices))
    else:
        results = [one_point(i) for i in indices]

    points: list[CurvePoint] = []
    failures: list[tuple[float, str]] = []
    for parameter, outcome in results:
        if isinstance(outcome, Exception):
            failures.append((parameter, f"{type(outcome).__name__}: {outcome}"))
        else:
            points.append(
                CurvePoint(
                    parameter=parameter,
                    delay=outcome.delay,
                    rate=outcome.rate,
                    provenance=outcome.provenance,
                    censored_fraction=outcome.censored_fraction,
                )
            )
    return OperationalCurve(points=points, provenance="monte-carlo", failures=failures)


def glrt_mean_increment(epsilon: float, sigma: float) -> float:
    """E1[d] for the GLRT increment with the mean drawn uniformly in (1, 1+eps).

    For a fixed mean at t = (m-1)/sigma standard deviations above 1,
    E[d | t] = [(1+t^2)(2 Phi(t) - 1) + 2 t phi(t)] / 2; the result
    averages this over t in (0, eps/sigma). By symmetry E0[d] is its
    negative.
    """
    if not (0 < epsilon < 1):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon!r}")
    if not (sigma > 0):
        raise ValueError(f"sigma must be > 0, got {sigma!r}")

    def conditional(t: np.ndarray) -> np.ndarray:
        return 0.5 * ((1 + t**2) * (2 * stats.norm.cdf(t) - 1) + 2 * t * stats.norm.pdf(t))

    upper = epsilon / sigma
    value, _ = integrate.quad(conditional, 0.0, upper)
    return value / upper


def _glrt_drawer_factory(
    epsilon: float, sigma: float
) -> Callable[[Hypothesis, np.random.Generator], Drawer]:
    def factory(hypothesis: Hypothesis, rng: np.random.Generator) -> Drawer:
        lo, hi = (1.0, 1.0 + epsilon) if hypothesis is Hypothesis.H1 else (1.0 - epsilon, 1.0)

        def draw(n: int) -> np.ndarray:
            means = rng.uniform(lo, hi, n)
            x = rng.normal(means, sigma)
            return np.asarray(glrt_increment(x, sigma), dtype=float)

        return draw

    return factory


def glrt_oc(
    epsilon: float,
    sigma: float,
    barrier_grid: Sequence[float],
    step_size_grid: Sequence[float],
    runs: int,
    seed,
    cap: int = DEFAULT_STEP_CAP,
) -> tuple[OperationalCurve, OperationalCurve]:
    """Operational curves of the GLRT-driven BLLR and LMS monitors.

    Per run and per step a regime mean is drawn uniformly from (1-eps, 1)
    under H0 or (1, 1+eps) under H1, a Gaussian growth rate is sampled
    around it, and the GLRT increment drives both detectors at zero
    (mid-point) threshold: BLLR with a = b from ``barrier_grid``, LMS over
    ``step_size_grid`` anchored at the numerically computed +-E1[d].

    A vanishing eps makes the hypotheses coincide and the crossing times
    explode toward the cap; that regime is reported as censored rather
    than asserted against.
    """
    factory = _glrt_drawer_factory(epsilon, sigma)
    mean_inc = glrt_mean_increment(epsilon, sigma)

    bllr_points: list[CurvePoint] = []
    bllr_failures: list[tuple[float, str]] = []
    for i, half in enumerate(barrier_grid):
        config = BllrConfig(lower_barrier=half, upper_barrier=half, threshold=0.0)
        try:
            est = _indexes_from_drawers(
                config, factory, _bllr_quantities(config), runs, (seed, 0, i), cap
            )
            bllr_points.append(
                CurvePoint(half, est.delay, est.rate, est.provenance, est.censored_fraction)
            )
        except Exception as exc:
            bllr_failures.append((half, f"{type(exc).__name__}: {exc}"))

    lms_points: list[CurvePoint] = []
    lms_failures: list[tuple[float, str]] = []
    for i, mu in enumerate(step_size_grid):
        config = LmsConfig(step_size=mu, threshold=0.0)
        try:
            est = _indexes_from_drawers(
                config,
                factory,
                _lms_quantities(config, -mean_inc, mean_inc),
                runs,
                (seed, 1, i),
                cap,
            )
            lms_points.append(
                CurvePoint(mu, est.delay, est.rate, est.provenance, est.censored_fraction)
            )
        except Exception as exc:
            lms_failures.append((mu, f"{type(exc).__name__}: {exc}"))

    return (
        OperationalCurve(bllr_points, "monte-carlo", bllr_failures),
        OperationalCurve(lms_points, "monte-carlo", lms_failures),
    )


def sprt_stopped_exp_mean(
    model: Model,
    gamma_lower: float,
    gamma_upper: float,
    runs: int,
    seed,
    cap: int = 1_000_000,
) -> tuple[float, float]:
    """Mean and standard error of e^{z(n)} at the SPRT stopping time under H0.

    The unclipped log-likelihood walk is run until it leaves
    (-gamma_lower, gamma_upper); optional stopping makes the expectation
    exactly 1, boundary overshoot included, so the estimate doubles as an
    end-to-end check of the sampling machinery.
    """
    if not (gamma_lower > 0 and gamma_upper > 0):
        raise ValueError("both thresholds must be > 0")
    values = np.empty(runs, dtype=float)
    for k in range(runs):
        rng = run_stream(seed, k, label="sprt")
        draw = _model_drawer(model, Hypothesis.H0, rng)
        carry = 0.0
        done = 0
        block = _BLOCK_START
        z_stop = math.nan
        while done < cap:
            n = min(block, cap - done)
            z = carry + np.cumsum(draw(n))
            hits = np.nonzero((z >= gamma_upper) | (z <= -gamma_lower))[0]
            if hits.size:
                z_stop = float(z[hits[0]])
                break
            carry = float(z[-1])
            done += n
            block = min(block * 2, _BLOCK_MAX)
        if math.isnan(z_stop):
            raise CensoredEstimateError(f"SPRT run {k} did not stop within {cap} steps")
        values[k] = math.exp(z_stop)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(runs))
