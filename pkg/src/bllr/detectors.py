"""Online decision statistics: BLLR, LMS/EWMA and Page's test.

All three detectors consume a stream of log-likelihood increments d(i) and
maintain a scalar statistic:

    BLLR:  z(i) = min(b, max(-a, z(i-1) + d(i)))      clipped random walk
    LMS :  w(i) = mu*d(i) + (1-mu)*w(i-1)             exponential average
    Page:  z(i) = max(0, z(i-1) + s*d(i)), s = +-1    one-sided CUSUM

The binary decision at any epoch compares the statistic to a threshold;
ties go to H0 so that repeated runs are deterministic.

States are plain immutable values; step functions are pure, so instances
can be shared freely across threads or simulation workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Hypothesis",
    "BllrConfig",
    "BllrState",
    "LmsConfig",
    "LmsState",
    "PageConfig",
    "PageState",
    "DetectorConfig",
    "DetectorState",
    "bllr_step",
    "lms_step",
    "page_step",
    "decide",
    "run_trajectory",
    "initial_state",
]


class Hypothesis(enum.Enum):
    """The two states of nature of the binary test."""

    H0 = 0
    H1 = 1


def _require_finite(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BllrConfig:
    """Barriers -a < 0 < b and decision threshold for the clipped walk.

    ``lower_barrier`` is the positive distance a of the lower barrier -a;
    ``math.inf`` is accepted for either barrier (removing that clip), and
    ``lower_barrier = 0`` is the degenerate configuration that makes the
    statistic coincide with a forward Page's test.
    """

    lower_barrier: float
    upper_barrier: float
    threshold: float = 0.0

    def __post_init__(self) -> None:
        a, b, g = self.lower_barrier, self.upper_barrier, self.threshold
        if math.isnan(a) or a < 0:
            raise ValueError(f"lower_barrier must be >= 0, got {a!r}")
        if math.isnan(b) or b <= 0:
            raise ValueError(f"upper_barrier must be > 0, got {b!r}")
        _require_finite(g, "threshold")
        if not (-a <= g < b):
            raise ValueError(
                f"threshold must lie in [-a, b) = [{-a}, {b}), got {g!r}"
            )


@dataclass(frozen=True)
class BllrState:
    """Current value of the clipped random walk, z(0) = 0 by default."""

    z: float = 0.0


@dataclass(frozen=True)
class LmsConfig:
    """Step size mu in (0, 1] and decision threshold for the LMS statistic.

    mu = 1 is the degenerate memoryless case w(i) = d(i), accepted because
    it is a useful analytic sanity point for the run-length solvers.
    """

    step_size: float
    threshold: float = 0.0

    def __post_init__(self) -> None:
        mu = self.step_size
        if math.isnan(mu) or not (0.0 < mu <= 1.0):
            raise ValueError(f"step_size must be in (0, 1], got {mu!r}")
        _require_finite(self.threshold, "threshold")


@dataclass(frozen=True)
class LmsState:
    """Current value of the exponentially weighted average, w(0) = 0."""

    w: float = 0.0


class PageSign(enum.Enum):
    """Orientation of Page's test: forward consumes d, reversed consumes -d."""

    FORWARD = 1
    REVERSED = -1


@dataclass(frozen=True)
class PageConfig:
    """Decision threshold and orientation for the one-sided CUSUM."""

    threshold: float
    sign: PageSign = PageSign.FORWARD

    def __post_init__(self) -> None:
        g = self.threshold
        if math.isnan(g) or g <= 0:
            raise ValueError(f"threshold must be > 0, got {g!r}")


@dataclass(frozen=True)
class PageState:
    """Current value of the CUSUM statistic, z_P >= 0."""

    z: float = 0.0

    def __post_init__(self) -> None:
        if math.isnan(self.z) or self.z < 0:
            raise ValueError(f"Page statistic must be >= 0, got {self.z!r}")


DetectorConfig = Union[BllrConfig, LmsConfig, PageConfig]
DetectorState = Union[BllrState, LmsState, PageState]


def bllr_step(state: BllrState, config: BllrConfig, d: float) -> BllrState:
    """Advance the clipped walk by one increment.

    Returns z = min(b, max(-a, z_prev + d)). Clipping uses the non-strict
    comparisons of the defining recursion, so a step landing exactly on a
    barrier stays on it.
    """
    d = _require_finite(d, "increment")
    lo = 0.0 - config.lower_barrier  # normalizes -0.0 to +0.0 when a == 0
    z = state.z + d
    if z <= lo:
        z = lo
    elif z >= config.upper_barrier:
        z = config.upper_barrier
    return BllrState(z)


def lms_step(state: LmsState, config: LmsConfig, d: float) -> LmsState:
    """Advance the exponential average: w = mu*d + (1-mu)*w_prev.

    The right-hand side is a convex combination of the new increment and
    the previous statistic.
    """
    d = _require_finite(d, "increment")
    mu = config.step_size
    return LmsState(mu * d + (1.0 - mu) * state.w)


def page_step(state: PageState, config: PageConfig, d: float) -> PageState:
    """Advance the CUSUM: z = max(0, z_prev + s*d) with s = +-1."""
    d = _require_finite(d, "increment")
    step = d if config.sign is PageSign.FORWARD else -d
    z = state.z + step
    if z <= 0.0:
        z = 0.0
    return PageState(z)


def decide(statistic: float, threshold: float) -> Hypothesis:
    """Threshold test: H1 iff statistic > threshold; ties go to H0."""
    statistic = _require_finite(statistic, "statistic")
    threshold = _require_finite(threshold, "threshold")
    return Hypothesis.H1 if statistic > threshold else Hypothesis.H0


def initial_state(config: DetectorConfig, value: float = 0.0) -> DetectorState:
    """Zero-initialized (or explicitly seeded) state for any detector config."""
    value = _require_finite(value, "value")
    if isinstance(config, BllrConfig):
        return BllrState(value)
    if isinstance(config, LmsConfig):
        return LmsState(value)
    if isinstance(config, PageConfig):
        return PageState(value)
    raise TypeError(f"unsupported detector config: {config!r}")


def _step(state: DetectorState, config: DetectorConfig, d: float) -> DetectorState:
    if isinstance(config, BllrConfig):
        return bllr_step(state, config, d)
    if isinstance(config, LmsConfig):
        return lms_step(state, config, d)
    if isinstance(config, PageConfig):
        return page_step(state, config, d)
    raise TypeError(f"unsupported detector config: {config!r}")


def run_trajectory(
    config: DetectorConfig,
    state: DetectorState,
    increments: Sequence[float],
) -> np.ndarray:
    """Drive a detector over a full increment stream.

    Element n of the output is the statistic after consuming increment n,
    so the output has the same length as the input. A non-finite increment
    raises ValueError naming the offending index.
    """
    out = np.empty(len(increments), dtype=float)
    for i, d in enumerate(increments):
        try:
            state = _step(state, config, float(d))
        except ValueError as exc:
            raise ValueError(f"increment {i}: {exc}") from None
        out[i] = state.z if not isinstance(state, LmsState) else state.w
    return out
