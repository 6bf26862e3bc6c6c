"""Sensor-side reading assessment.

Each attribute keeps a running mean and (population) variance over the values
it has transmitted since the last reset. A new reading is standardized against
them; readings outside the Z-bounds are dropped as faulty, readings whose Z
moved less than ``epsilon`` since the previous reading are dropped as
uninteresting, everything else is transmitted and folded into the statistics.

Everything here is O(1) in time and space per reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from wban.core import Decision

DEFAULT_EPSILON = 0.2
DEFAULT_RESET_HOURS = 2


class VarianceDegenerate(ArithmeticError):
    """Raised when a Z-score is requested while the variance is ~0."""


@dataclass(frozen=True)
class FilterParams:
    """Thresholds for one attribute's filter.

    Attributes:
        epsilon: Minimum change in Z for a reading to be worth sending.
        l_th: Lower Z bound; anything below is treated as a sensor fault.
        h_th: Upper Z bound.
        reset_period_steps: Statistics are discarded after this many
            assessments (2 hours at 1 Hz by default).
        warmup_count: Readings always transmitted after a reset.
        variance_floor: Variance below which Z is undefined.
        ack_interval_steps: Keep-alive period of the 1-byte ACK.
    """

    epsilon: float = DEFAULT_EPSILON
    l_th: float = -4.0
    h_th: float = 4.0
    reset_period_steps: int = DEFAULT_RESET_HOURS * 3600
    warmup_count: int = 30
    variance_floor: float = 1e-12
    ack_interval_steps: int = 60

    def __post_init__(self) -> None:
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.l_th < self.h_th:
            raise ValueError(f"need l_th < h_th, got ({self.l_th}, {self.h_th})")
        if self.reset_period_steps < 1:
            raise ValueError("reset_period_steps must be >= 1")
        if self.warmup_count < 2:
            raise ValueError("warmup_count must be >= 2")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be > 0")
        if self.ack_interval_steps < 1:
            raise ValueError("ack_interval_steps must be >= 1")


@dataclass(frozen=True, slots=True)
class FilterState:
    """Running statistics for one attribute; fixed size by construction."""

    m: float = 0.0
    v: float = 0.0
    n: int = 0
    z_prev: float = 0.0
    steps_since_reset: int = 0


STATE_FIELD_COUNT = len(fields(FilterState))


def z_score(state: FilterState, x: float, variance_floor: float = 1e-12) -> float:
    if state.v < variance_floor:
        raise VarianceDegenerate(f"variance {state.v!r} below floor {variance_floor!r}")
    return (x - state.m) / math.sqrt(state.v)


def update_stats(state: FilterState, x: float) -> FilterState:
    """Fold ``x`` into the running mean and variance.

    The variance update uses the mean *before* ``x`` is added, which keeps
    ``v`` equal to the batch population variance of every value seen.
    """
    n1 = state.n + 1
    delta = x - state.m
    m = state.m + delta / n1
    v = state.n / n1 * (state.v + delta * delta / n1)
    return FilterState(m, v, n1, state.z_prev, state.steps_since_reset)


def assess(
    state: FilterState, params: FilterParams, x: float
) -> tuple[Decision, FilterState]:
    """Classify one reading and return the successor state.

    During warm-up (too few values, or zero variance) every reading is
    transmitted. Afterwards only transmitted readings update ``m``/``v``,
    while ``z_prev`` follows every assessed reading, discards included.
    """
    if state.n < params.warmup_count or state.v < params.variance_floor:
        decision = Decision.TRANSMIT
        new = update_stats(state, x)
    else:
        z_new = (x - state.m) / math.sqrt(state.v)
        if z_new < params.l_th or z_new > params.h_th:
            decision = Decision.DISCARD_FAULTY
            new = state
        elif abs(z_new - state.z_prev) >= params.epsilon:
            decision = Decision.TRANSMIT
            new = update_stats(state, x)
        else:
            decision = Decision.DISCARD_UNINTERESTING
            new = state
        new = FilterState(new.m, new.v, new.n, z_new, new.steps_since_reset)

    steps = new.steps_since_reset + 1
    if steps >= params.reset_period_steps:
        return decision, FilterState()
    return decision, FilterState(new.m, new.v, new.n, new.z_prev, steps)


def ack_schedule(params: FilterParams) -> int:
    """Steps between keep-alive ACK bytes."""
    return params.ack_interval_steps


def ack_bytes(n_steps: int, params: FilterParams) -> int:
    """ACK bytes one sensor sends over ``n_steps`` steps."""
    return n_steps // ack_schedule(params)


# Integer codes used for bulk decision arrays; -1 marks a missing reading.
DECISION_CODES = {
    Decision.TRANSMIT: 0,
    Decision.DISCARD_UNINTERESTING: 1,
    Decision.DISCARD_FAULTY: 2,
}
MISSING = -1


def filter_series(
    values: np.ndarray,
    params: FilterParams,
    state: FilterState | None = None,
) -> tuple[np.ndarray, FilterState]:
    """Run :func:`assess` over one attribute's series.

    NaN entries are absent readings and are skipped without touching the state.

    Returns:
        ``(codes, final_state)`` where ``codes`` holds one entry of
        :data:`DECISION_CODES` (or :data:`MISSING`) per step.
    """
    state = FilterState() if state is None else state
    values = np.asarray(values, dtype=float)
    codes = np.full(values.shape, MISSING, dtype=np.int8)
    lookup = DECISION_CODES
    for t, x in enumerate(values.tolist()):
        if x != x:
            continue
        decision, state = assess(state, params, x)
        codes[t] = lookup[decision]
    return codes, state


def bypass_series(values: np.ndarray) -> np.ndarray:
    """Decision codes for an unfiltered sensor: transmit every present reading."""
    values = np.asarray(values, dtype=float)
    return np.where(np.isnan(values), MISSING, 0).astype(np.int8)


def filter_matrix(
    series: np.ndarray,
    params: FilterParams | list[FilterParams],
    bypass: bool = False,
) -> np.ndarray:
    """Decision codes for a ``(T, K)`` matrix, one independent filter per column."""
    series = np.asarray(series, dtype=float)
    K = series.shape[1]
    per_dim = params if isinstance(params, list) else [params] * K
    if len(per_dim) != K:
        raise ValueError(f"need {K} FilterParams, got {len(per_dim)}")
    codes = np.empty(series.shape, dtype=np.int8)
    for d in range(K):
        if bypass:
            codes[:, d] = bypass_series(series[:, d])
        else:
            codes[:, d], _ = filter_series(series[:, d], per_dim[d])
    return codes


def transmitted_values(series: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """The readings that reach the gateway; NaN wherever nothing was sent."""
    return np.where(codes == DECISION_CODES[Decision.TRANSMIT], series, np.nan)
