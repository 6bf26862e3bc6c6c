from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wban.core import Decision
from wban.tier1 import (
    STATE_FIELD_COUNT,
    FilterParams,
    FilterState,
    VarianceDegenerate,
    ack_bytes,
    ack_schedule,
    assess,
    filter_series,
    update_stats,
    z_score,
)


def batch_stats(values):
    """Exact mean and population variance over rationals."""
    xs = [Fraction(v) for v in values]
    n = len(xs)
    m = sum(xs) / n
    v = sum((x - m) ** 2 for x in xs) / n
    return float(m), float(v)


def stream(values, state=None):
    state = state or FilterState()
    for x in values:
        state = update_stats(state, x)
    return state


def hp_z(x, m, v):
    mpmath.mp.dps = 50
    return float((mpmath.mpf(x) - mpmath.mpf(m)) / mpmath.sqrt(mpmath.mpf(v)))


class TestZScore:
    def test_at_mean(self):
        assert z_score(FilterState(m=100, v=25, n=40), 100) == 0.0

    @pytest.mark.parametrize("m,v,x", [(100, 25, 110), (0, 1, -3)])
    def test_against_high_precision(self, m, v, x):
        expected = hp_z(x, m, v)
        assert expected in (2.0, -3.0)
        assert z_score(FilterState(m=m, v=v, n=40), x) == pytest.approx(expected, rel=1e-15)

    def test_degenerate_variance(self):
        with pytest.raises(VarianceDegenerate):
            z_score(FilterState(m=5, v=0.0, n=3), 5.0)


class TestUpdateStats:
    def test_append_to_constant(self):
        s = update_stats(stream([10, 10, 10]), 14)
        assert (s.m, s.v, s.n) == (pytest.approx(11), pytest.approx(3), 4)
        assert batch_stats([10, 10, 10, 14]) == (11.0, 3.0)

    def test_first_value(self):
        s = update_stats(FilterState(), 5)
        assert (s.m, s.v, s.n) == (5, 0, 1)

    def test_one_to_five(self):
        s = stream([1, 2, 3, 4, 5])
        assert batch_stats([1, 2, 3, 4, 5]) == (3.0, 2.0)
        assert s.m == pytest.approx(3.0, rel=1e-15)
        assert s.v == pytest.approx(2.0, rel=1e-15)
        assert s.n == 5

    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=300))
    @settings(max_examples=200)
    def test_matches_batch(self, values):
        s = stream(values)
        m, v = batch_stats(values)
        assert s.n == len(values)
        assert s.m == pytest.approx(m, rel=1e-9, abs=1e-9)
        assert s.v == pytest.approx(v, rel=1e-9, abs=1e-9)
        assert s.v >= 0


def base_state():
    return FilterState(m=100.0, v=25.0, n=50, z_prev=0.0)


PARAMS = FilterParams(epsilon=0.2, l_th=-4, h_th=4)


class TestAssess:
    def test_transmit(self):
        decision, new = assess(base_state(), PARAMS, 110.0)
        assert decision is Decision.TRANSMIT
        assert new.n == 51
        assert new.z_prev == pytest.approx(2.0)

    def test_uninteresting(self):
        decision, new = assess(base_state(), PARAMS, 100.25)
        assert decision is Decision.DISCARD_UNINTERESTING
        assert (new.m, new.v, new.n) == (100.0, 25.0, 50)
        assert new.z_prev == pytest.approx(0.05)

    def test_faulty(self):
        decision, new = assess(base_state(), PARAMS, 200.0)
        assert decision is Decision.DISCARD_FAULTY
        assert (new.m, new.v, new.n) == (100.0, 25.0, 50)
        # z_prev follows every assessed reading
        assert new.z_prev == pytest.approx(20.0)

    def test_bounds_inclusive(self):
        assert assess(base_state(), PARAMS, 120.0)[0] is Decision.TRANSMIT
        assert assess(base_state(), PARAMS, 80.0)[0] is Decision.TRANSMIT

    def test_epsilon_zero_transmits_everything_in_range(self, rng):
        params = FilterParams(epsilon=0.0)
        state = base_state()
        for x in rng.normal(100, 5, 500):
            decision, state = assess(state, params, float(x))
            assert decision is not Decision.DISCARD_UNINTERESTING

    def test_warmup_transmits(self):
        params = FilterParams(warmup_count=30)
        state = FilterState()
        for k in range(30):
            decision, state = assess(state, params, 70.0 + (k % 3))
            assert decision is Decision.TRANSMIT
        assert state.n == 30
        assert state.z_prev == 0.0

    def test_zero_variance_stays_in_warmup(self):
        state = FilterState()
        params = FilterParams(warmup_count=2)
        for _ in range(10):
            decision, state = assess(state, params, 7.0)
            assert decision is Decision.TRANSMIT
        assert state.v == 0.0

    def test_periodic_reset(self):
        params = FilterParams(reset_period_steps=5, warmup_count=2)
        state = FilterState()
        for k in range(4):
            _, state = assess(state, params, float(k))
        assert state.steps_since_reset == 4
        _, state = assess(state, params, 10.0)
        assert state == FilterState()

    def test_deterministic(self):
        assert assess(base_state(), PARAMS, 103.3) == assess(base_state(), PARAMS, 103.3)

    def test_fixed_size_state(self, rng):
        _, state = filter_series(rng.normal(80, 3, 5000), FilterParams())
        assert STATE_FIELD_COUNT == 5
        assert not hasattr(state, "__dict__")

    @given(
        m=st.floats(-100, 100),
        v=st.floats(1e-3, 1e3),
        z_prev=st.floats(-4, 4),
        x=st.floats(-500, 500),
        e1=st.floats(0, 2),
        de=st.floats(0, 2),
    )
    @settings(max_examples=300)
    def test_epsilon_monotone(self, m, v, z_prev, x, e1, de):
        state = FilterState(m=m, v=v, n=100, z_prev=z_prev)
        d1, _ = assess(state, FilterParams(epsilon=e1), x)
        d2, _ = assess(state, FilterParams(epsilon=e1 + de), x)
        if d1 is Decision.DISCARD_UNINTERESTING:
            assert d2 is Decision.DISCARD_UNINTERESTING

    @given(st.lists(st.floats(0, 200, allow_nan=False), min_size=40, max_size=400),
           st.floats(0, 1))
    @settings(max_examples=100)
    def test_transmitted_points_within_bounds(self, values, eps):
        params = FilterParams(epsilon=eps)
        state = FilterState()
        for x in values:
            warm = state.n < params.warmup_count or state.v < params.variance_floor
            z = None if warm else (x - state.m) / np.sqrt(state.v)
            decision, state = assess(state, params, x)
            if decision is Decision.TRANSMIT and z is not None:
                assert params.l_th <= z <= params.h_th

    def test_stats_track_transmitted_values(self, rng):
        params = FilterParams(epsilon=0.3, reset_period_steps=10**9)
        state = FilterState()
        sent = []
        for x in rng.normal(60, 4, 3000).tolist():
            decision, state = assess(state, params, x)
            if decision is Decision.TRANSMIT:
                sent.append(x)
        m, v = batch_stats(sent)
        assert state.n == len(sent)
        assert state.m == pytest.approx(m, rel=1e-9)
        assert state.v == pytest.approx(v, rel=1e-9)


class TestParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epsilon": -0.1},
            {"l_th": 1, "h_th": 1},
            {"reset_period_steps": 0},
            {"warmup_count": 1},
            {"variance_floor": 0},
            {"ack_interval_steps": 0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FilterParams(**kwargs)

    def test_reset_default_two_hours(self):
        assert FilterParams().reset_period_steps == 7200


class TestAck:
    def test_default(self):
        assert ack_schedule(FilterParams()) == 60

    def test_every_step(self):
        p = FilterParams(ack_interval_steps=1)
        assert ack_schedule(p) == 1
        assert ack_bytes(500, p) == 500

    def test_hourly(self):
        p = FilterParams(ack_interval_steps=3600)
        assert ack_bytes(2 * 3600 + 5, p) == 2


def test_filter_series_skips_missing():
    values = np.array([1.0, np.nan, 2.0, 3.0])
    codes, state = filter_series(values, FilterParams())
    assert codes.tolist() == [0, -1, 0, 0]
    assert state.n == 3
