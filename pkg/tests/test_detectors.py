"""Tests for the detector step functions and trajectory driver."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bllr.detectors import (
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

INF = math.inf

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)
small_step = st.floats(min_value=-5, max_value=5, allow_nan=False)


class TestBllrStep:
    def test_interior_step(self):
        out = bllr_step(BllrState(0.0), BllrConfig(1.0, 1.0), 0.3)
        assert out.z == pytest.approx(0.3)

    def test_upper_clip(self):
        out = bllr_step(BllrState(0.9), BllrConfig(1.0, 1.0), 0.5)
        assert out.z == 1.0

    def test_lower_clip(self):
        out = bllr_step(BllrState(-0.8), BllrConfig(1.0, 1.0), -0.5)
        assert out.z == -1.0

    def test_exact_barrier_hit_stays(self):
        cfg = BllrConfig(1.0, 1.0)
        assert bllr_step(BllrState(0.5), cfg, 0.5).z == 1.0
        assert bllr_step(BllrState(1.0), cfg, 0.0).z == 1.0

    def test_infinite_upper_barrier_never_clips(self):
        cfg = BllrConfig(1.0, INF)
        assert bllr_step(BllrState(0.0), cfg, 100.0).z == 100.0

    def test_rejects_non_finite_increment(self):
        cfg = BllrConfig(1.0, 1.0)
        for bad in (math.nan, INF, -INF):
            with pytest.raises(ValueError):
                bllr_step(BllrState(0.0), cfg, bad)

    @given(
        z=finite,
        d=small_step,
        a=st.floats(min_value=0.1, max_value=20),
        b=st.floats(min_value=0.1, max_value=20),
    )
    def test_containment(self, z, d, a, b):
        start = min(b, max(-a, z))
        out = bllr_step(BllrState(start), BllrConfig(a, b, threshold=0.0), d)
        assert -a <= out.z <= b

    @given(
        z=st.floats(min_value=-2, max_value=2),
        d1=small_step,
        d2=small_step,
    )
    def test_monotone_in_increment(self, z, d1, d2):
        cfg = BllrConfig(2.0, 2.0)
        lo, hi = sorted((d1, d2))
        assert bllr_step(BllrState(z), cfg, lo).z <= bllr_step(BllrState(z), cfg, hi).z

    def test_containment_long_random_stream(self):
        rng = np.random.default_rng(7)
        cfg = BllrConfig(1.5, 2.5, 0.0)
        d = rng.normal(0.0, 1.0, 100_000)
        path = run_trajectory(cfg, BllrState(0.0), d)
        assert path.min() >= -1.5 and path.max() <= 2.5
        assert path.min() == -1.5 and path.max() == 2.5  # both clips engaged


class TestBllrConfig:
    def test_negative_barrier_rejected(self):
        with pytest.raises(ValueError):
            BllrConfig(-1.0, 1.0)

    def test_zero_upper_barrier_rejected(self):
        with pytest.raises(ValueError):
            BllrConfig(1.0, 0.0)

    def test_threshold_outside_barriers_rejected(self):
        with pytest.raises(ValueError):
            BllrConfig(1.0, 1.0, threshold=1.0)
        with pytest.raises(ValueError):
            BllrConfig(1.0, 1.0, threshold=-1.5)

    def test_degenerate_page_form_allowed(self):
        cfg = BllrConfig(0.0, INF, threshold=1.0)
        assert cfg.lower_barrier == 0.0


class TestLmsStep:
    def test_single_step_from_zero(self):
        assert lms_step(LmsState(0.0), LmsConfig(0.05), 1.0).w == pytest.approx(0.05)

    def test_fixed_point(self):
        for mu in (0.01, 0.3, 0.9):
            assert lms_step(LmsState(1.7), LmsConfig(mu), 1.7).w == pytest.approx(1.7)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            lms_step(LmsState(0.0), LmsConfig(0.1), math.nan)

    def test_step_size_validation(self):
        with pytest.raises(ValueError):
            LmsConfig(0.0)
        with pytest.raises(ValueError):
            LmsConfig(1.2)
        LmsConfig(1.0)  # degenerate memoryless case is allowed

    def test_transient_mean_matches_moment_formula(self):
        # Sample mean of w(i) over many runs ~ [1-(1-mu)^i] E[d].
        rng = np.random.default_rng(11)
        mu, mean_d, i_steps, runs = 0.1, -0.5, 12, 10_000
        finals = np.empty(runs)
        for r in range(runs):
            state = LmsState(0.0)
            for d in rng.normal(mean_d, 1.0, i_steps):
                state = lms_step(state, LmsConfig(mu), d)
            finals[r] = state.w
        expected = (1 - (1 - mu) ** i_steps) * mean_d
        se = finals.std(ddof=1) / math.sqrt(runs)
        assert abs(finals.mean() - expected) < 3 * se

    @given(st.lists(small_step, min_size=1, max_size=30), st.floats(min_value=0.05, max_value=0.95))
    @settings(max_examples=50)
    def test_geometric_form(self, ds, mu):
        # w(n) = sum_k mu (1-mu)^k d(n-k), to accumulated rounding.
        state = LmsState(0.0)
        for d in ds:
            state = lms_step(state, LmsConfig(mu), d)
        direct = sum(mu * (1 - mu) ** k * ds[len(ds) - 1 - k] for k in range(len(ds)))
        assert state.w == pytest.approx(direct, rel=1e-12, abs=1e-12)


class TestPageStep:
    def test_reflection_at_zero(self):
        assert page_step(PageState(0.0), PageConfig(1.0), -0.4).z == 0.0

    def test_interior_step(self):
        assert page_step(PageState(0.2), PageConfig(1.0), 0.3).z == pytest.approx(0.5)

    def test_reversed_sign_then_reflection(self):
        cfg = PageConfig(1.0, sign=PageSign.REVERSED)
        assert page_step(PageState(0.1), cfg, 0.3).z == 0.0

    def test_state_nonnegative(self):
        with pytest.raises(ValueError):
            PageState(-0.1)

    def test_threshold_positive(self):
        with pytest.raises(ValueError):
            PageConfig(0.0)


class TestDecide:
    def test_above_threshold(self):
        assert decide(0.1, 0.0) is Hypothesis.H1

    def test_below_threshold(self):
        assert decide(-0.1, 0.0) is Hypothesis.H0

    def test_tie_goes_to_h0(self):
        assert decide(0.0, 0.0) is Hypothesis.H0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            decide(math.nan, 0.0)


class TestRunTrajectory:
    def test_bllr_saturation(self):
        path = run_trajectory(BllrConfig(1.0, 1.0), BllrState(0.0), [0.6, 0.6, 0.6])
        assert path.tolist() == [0.6, 1.0, 1.0]

    def test_lms_hand_computation(self):
        path = run_trajectory(LmsConfig(0.5), LmsState(0.0), [1.0, 1.0])
        assert path.tolist() == [0.5, 0.75]

    def test_length_matches_input(self):
        rng = np.random.default_rng(0)
        d = rng.normal(size=37)
        assert run_trajectory(PageConfig(5.0), PageState(0.0), d).shape == (37,)

    def test_error_names_offending_index(self):
        with pytest.raises(ValueError, match="increment 2"):
            run_trajectory(BllrConfig(1.0, 1.0), BllrState(0.0), [0.1, 0.1, math.inf])

    def test_degenerate_bllr_equals_forward_page_bitwise(self):
        # Lower barrier at 0 and no upper barrier turn the clipped walk
        # into exactly Page's test, float for float.
        rng = np.random.default_rng(123)
        for _ in range(25):
            d = rng.normal(-0.1, 1.0, 400)
            zb = run_trajectory(BllrConfig(0.0, INF, threshold=1.0), BllrState(0.0), d)
            zp = run_trajectory(PageConfig(3.0), PageState(0.0), d)
            assert np.array_equal(zb, zp)
            assert all(a == b for a, b in zip(zb, zp))

    def test_determinism(self):
        rng = np.random.default_rng(5)
        d = rng.normal(size=200)
        first = run_trajectory(BllrConfig(1.0, 2.0), BllrState(0.0), d)
        second = run_trajectory(BllrConfig(1.0, 2.0), BllrState(0.0), d)
        assert np.array_equal(first, second)

    def test_initial_state_dispatch(self):
        assert isinstance(initial_state(BllrConfig(1, 1)), BllrState)
        assert isinstance(initial_state(LmsConfig(0.1)), LmsState)
        assert isinstance(initial_state(PageConfig(1.0), 0.5), PageState)
