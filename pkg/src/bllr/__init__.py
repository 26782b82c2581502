"""BLLR: barrier log-likelihood ratio sequential decision algorithms.

A clipped log-likelihood random walk for online binary decisions under a
drifting state of nature, with the LMS/EWMA recursion and Page's test as
baselines, Wald-approximation and Fredholm-equation performance calculus,
a reproducible Monte Carlo harness, and a pandemic growth-rate monitor.
"""

from .detectors import (
    BllrConfig,
    BllrState,
    Hypothesis,
    LmsConfig,
    LmsState,
    PageConfig,
    PageSign,
    PageState,
    bllr_step,
    decide,
    initial_state,
    lms_step,
    page_step,
    run_trajectory,
)
from .models import (
    ExponentialPairModel,
    GammaPairModel,
    GaussianShiftModel,
    GlrtGaussianModel,
    KlPair,
    effective_divergence,
    glrt_increment,
)
from .theory import (
    BllrArlIndexes,
    FredholmDivergenceError,
    FredholmProblem,
    FredholmSolution,
    PerformanceIndexes,
    arl_page_large_gamma,
    arl_page_wald,
    bllr_corrected_performance,
    bllr_error_time,
    bllr_indexes,
    bllr_midpoint_performance,
    fredholm_fixed_point,
    lms_arl,
    lms_mean_var,
    lms_performance,
    oc_large_r,
    page_arl_exact,
)
from .montecarlo import (
    CurvePoint,
    EmpiricalIndexes,
    HittingTimeSample,
    OperationalCurve,
    SweepSpec,
    empirical_indexes,
    glrt_oc,
    hitting_time,
    oc_sweep,
    run_stream,
    sprt_stopped_exp_mean,
    stationary_mean,
)
from .covid import (
    CrossingEvent,
    DailySeries,
    GrowthRateSeries,
    RegimeReport,
    estimate_sigma,
    growth_rates,
    italy_fixture_path,
    load_daily_positives,
    moving_mean,
    run_pandemic_monitor,
)

__version__ = "0.1.0"
