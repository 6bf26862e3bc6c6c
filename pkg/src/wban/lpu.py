"""Gateway-side reconstruction of the sparse transmitted stream.

A reading that does not arrive is taken to be unchanged since the previous
step. Steps before every dimension has been heard from at least once are not
forwarded to the detector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from wban.core import TimeStepVector


@dataclass(frozen=True)
class ReconstructionState:
    last_value: tuple[float, ...]
    initialized: tuple[bool, ...]

    @classmethod
    def empty(cls, n_dims: int) -> ReconstructionState:
        return cls((0.0,) * n_dims, (False,) * n_dims)

    @property
    def ready(self) -> bool:
        return all(self.initialized)


def reconstruct_step(
    state: ReconstructionState, received: Mapping[int, float], t: int
) -> tuple[TimeStepVector | None, ReconstructionState]:
    """Advance the reconstruction by one step.

    Args:
        state: Carry-forward state from the previous step.
        received: ``{dimension: value}`` for readings that arrived at ``t``.
        t: Current step.

    Returns:
        The reconstructed vector (``None`` while some dimension has never been
        received) and the new state.
    """
    last = list(state.last_value)
    init = list(state.initialized)
    k = len(last)
    mask = np.zeros(k, dtype=bool)
    for d, value in received.items():
        if not 0 <= d < k:
            raise IndexError(f"dimension {d} out of range for K={k}")
        last[d] = value
        init[d] = True
        mask[d] = True
    new_state = ReconstructionState(tuple(last), tuple(init))
    if not new_state.ready:
        return None, new_state
    return TimeStepVector(t, np.array(last, dtype=float), mask), new_state


def reconstruct_series(
    transmitted: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Vectorized carry-forward over a whole ``(T, K)`` transmit matrix.

    ``transmitted`` holds the received value, or NaN where nothing arrived.
    Equivalent to folding :func:`reconstruct_step` over every step.

    Returns:
        ``(values, received_mask, first_step)``: ``values`` and the mask cover
        steps ``first_step`` onward. If some dimension never arrives,
        ``first_step == T`` and both arrays are empty.
    """
    transmitted = np.asarray(transmitted, dtype=float)
    if transmitted.ndim != 2:
        raise ValueError("expected a (T, K) matrix")
    T, K = transmitted.shape
    received = ~np.isnan(transmitted)
    idx = np.where(received, np.arange(T)[:, None], -1)
    np.maximum.accumulate(idx, axis=0, out=idx)
    if T == 0 or np.any(idx[-1] < 0):
        return np.empty((0, K)), np.empty((0, K), dtype=bool), T
    first = int(np.max(np.argmax(received, axis=0)))
    values = transmitted[idx[first:], np.arange(K)]
    return values, received[first:], first


def normalize_window(window: np.ndarray) -> np.ndarray:
    """Min-max scale each column of a window to ``[0, 1]``.

    A column with no spread maps to 0.0.
    """
    window = np.asarray(window, dtype=float)
    lo = window.min(axis=0)
    span = window.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = (window - lo) / safe
    out[:, span <= 0] = 0.0
    return np.clip(out, 0.0, 1.0, out=out)
