"""Ground truth and scoring for both tiers.

Covers synthetic anomaly injection, MAD-based fault labels, confusion-matrix
metrics, ROC/AUC, normalized MSE of the reconstructed signal, and the
epsilon trade-off sweep.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from wban.core import Decision
from wban.lpu import reconstruct_series
from wban.tier1 import (
    DECISION_CODES,
    FilterParams,
    filter_matrix,
    transmitted_values,
)


class LengthMismatch(ValueError):
    pass


class SingleClass(ValueError):
    pass


class DegenerateMAD(UserWarning):
    pass


class DegenerateSignal(UserWarning):
    pass


@dataclass(frozen=True)
class InjectionSpec:
    """How synthetic anomalies are planted.

    Attributes:
        rate: Fraction of steps to corrupt.
        magnitude_sigma: Offset size in units of each column's standard deviation.
        dims_per_event: Columns corrupted at each chosen step.
        rng_seed: Seed for step, column and sign choices.
    """

    rate: float = 0.05
    magnitude_sigma: float = 6.0
    dims_per_event: int = 2
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.rate <= 1:
            raise ValueError(f"rate must be in [0, 1], got {self.rate}")
        if not self.magnitude_sigma > 0:
            raise ValueError("magnitude_sigma must be positive")
        if self.dims_per_event < 1:
            raise ValueError("dims_per_event must be >= 1")


def inject_anomalies(
    series: np.ndarray, spec: InjectionSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Offset randomly chosen steps by +/- ``magnitude_sigma`` standard deviations.

    Exactly ``floor(rate * T)`` distinct steps are chosen. At each, ``dims_per_event``
    distinct columns are shifted, each with its own random sign.

    Returns:
        ``(corrupted, labels)`` with ``labels`` a boolean vector over steps.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    T, K = series.shape
    if T == 0:
        raise ValueError("series is empty")
    if spec.dims_per_event > K:
        raise ValueError(f"dims_per_event={spec.dims_per_event} exceeds K={K}")
    rng = np.random.default_rng(spec.rng_seed)
    sigma = np.nanstd(series, axis=0)
    n_events = math.floor(spec.rate * T)
    steps = np.sort(rng.choice(T, size=n_events, replace=False))
    corrupted = series.copy()
    labels = np.zeros(T, dtype=bool)
    labels[steps] = True
    for t in steps:
        dims = rng.choice(K, size=spec.dims_per_event, replace=False)
        signs = rng.choice((-1.0, 1.0), size=spec.dims_per_event)
        corrupted[t, dims] += signs * spec.magnitude_sigma * sigma[dims]
    return corrupted, labels


def label_faults_mad(series: np.ndarray, k: float = 3.0) -> np.ndarray:
    """Flag points further than ``k`` MADs from the median.

    With MAD == 0 the rule degenerates to "anything off the median"; a
    :class:`DegenerateMAD` warning is issued.
    """
    x = np.asarray(series, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    dev = np.abs(x - np.median(x))
    mad = np.median(dev)
    if mad == 0:
        warnings.warn("MAD is zero; flagging every point off the median", DegenerateMAD)
        return dev > 0
    return dev > k * mad


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def flipped(self) -> ConfusionCounts:
        """Counts with the negative class treated as positive."""
        return ConfusionCounts(self.tn, self.fn, self.fp, self.tp)


def confusion(flags: Sequence[bool], labels: Sequence[bool]) -> ConfusionCounts:
    flags = np.asarray(flags, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    if flags.shape != labels.shape:
        raise LengthMismatch(f"{flags.shape} flags vs {labels.shape} labels")
    return ConfusionCounts(
        tp=int(np.sum(flags & labels)),
        fp=int(np.sum(flags & ~labels)),
        fn=int(np.sum(~flags & labels)),
        tn=int(np.sum(~flags & ~labels)),
    )


def _ratio(num: float, den: float) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


def precision_recall_f1(c: ConfusionCounts) -> dict:
    """Precision, recall and F1; a zero denominator gives 0 and sets ``degenerate``."""
    precision, d1 = _ratio(c.tp, c.tp + c.fp)
    recall, d2 = _ratio(c.tp, c.tp + c.fn)
    f1, d3 = _ratio(2 * precision * recall, precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1, "degenerate": d1 or d2 or d3}


def classification_table(c: ConfusionCounts) -> dict:
    """Per-class rows plus a support-weighted average, shaped like a classifier report."""
    rows = {
        "0": {**precision_recall_f1(c.flipped()), "support": c.tn + c.fp},
        "1": {**precision_recall_f1(c), "support": c.tp + c.fn},
    }
    total = c.total
    avg = {}
    for key in ("precision", "recall", "f1"):
        avg[key] = (
            sum(r[key] * r["support"] for r in rows.values()) / total if total else 0.0
        )
    avg["support"] = total
    rows["avg / total"] = avg
    return rows


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_auc(scores: Sequence[float], labels: Sequence[bool]) -> RocCurve:
    """ROC curve over every distinct score, and its trapezoidal area.

    A point is predicted positive when its score is at least the threshold;
    tied scores move together. The curve starts at (0, 0).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.shape} scores vs {labels.shape} labels")
    P = int(labels.sum())
    N = len(labels) - P
    if P == 0 or N == 0:
        raise SingleClass("ROC needs both positive and negative labels")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # Keep only the last index of each run of tied scores.
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tpr = np.r_[0.0, tp[last] / P]
    fpr = np.r_[0.0, fp[last] / N]
    thresholds = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def fpr_at_full_recall(curve: RocCurve) -> float:
    """Smallest false-positive rate at which every positive is caught."""
    return float(curve.fpr[np.argmax(curve.tpr >= 1.0)])


def nmse(original: Sequence[float], reconstructed: Sequence[float]) -> float:
    """MSE normalized by the variance of ``original`` and clipped to ``[0, 1]``.

    0 is a perfect copy, 1 is no better than predicting the mean. Positions
    where either series is NaN are ignored.
    """
    y = np.asarray(original, dtype=float)
    y_hat = np.asarray(reconstructed, dtype=float)
    if y.shape != y_hat.shape:
        raise LengthMismatch(f"{y.shape} vs {y_hat.shape}")
    ok = np.isfinite(y) & np.isfinite(y_hat)
    y, y_hat = y[ok], y_hat[ok]
    if len(y) == 0:
        raise ValueError("no overlapping finite points")
    mse = float(np.mean((y - y_hat) ** 2))
    var = float(np.var(y))
    if var == 0:
        warnings.warn("original signal is constant", DegenerateSignal)
        return 0.0 if mse == 0 else 1.0
    return min(max(mse / var, 0.0), 1.0)


def carry_forward(transmitted: np.ndarray) -> np.ndarray:
    """Per-column carry-forward of a transmit matrix, NaN before the first receipt."""
    transmitted = np.asarray(transmitted, dtype=float)
    out = np.full(transmitted.shape, np.nan)
    for d in range(transmitted.shape[1]):
        values, _, first = reconstruct_series(transmitted[:, d : d + 1])
        out[first:, d] = values[:, 0]
    return out


def epsilon_sweep(
    series: np.ndarray,
    epsilons: Sequence[float],
    base: FilterParams | None = None,
) -> list[dict]:
    """Discard rate and reconstruction error of the sensor filter across ``epsilons``.

    For each epsilon every column is filtered independently, the gateway view is
    rebuilt by carry-forward, and NMSE is taken against the unfiltered signal.

    Returns:
        One row per epsilon with column-averaged percentages of present readings
        that were withheld (``discard_pct``), withheld as uninteresting and
        withheld as faulty, the column-averaged ``nmse``, and per-column lists.
    """
    if len(epsilons) == 0:
        raise ValueError("epsilon grid is empty")
    series = np.asarray(series, dtype=float)
    base = base or FilterParams()
    n_present = (~np.isnan(series)).sum(axis=0)
    codes_of = DECISION_CODES
    rows = []
    for eps in epsilons:
        codes = filter_matrix(series, replace(base, epsilon=float(eps)))
        pct = {
            key: 100.0 * (codes == codes_of[dec]).sum(axis=0) / n_present
            for key, dec in (
                ("uninteresting", Decision.DISCARD_UNINTERESTING),
                ("faulty", Decision.DISCARD_FAULTY),
            )
        }
        discard = pct["uninteresting"] + pct["faulty"]
        rebuilt = carry_forward(transmitted_values(series, codes))
        errs = [nmse(series[:, d], rebuilt[:, d]) for d in range(series.shape[1])]
        rows.append(
            {
                "epsilon": float(eps),
                "discard_pct": float(np.mean(discard)),
                "nmse": float(np.mean(errs)),
                "uninteresting_pct": float(np.mean(pct["uninteresting"])),
                "faulty_pct": float(np.mean(pct["faulty"])),
                "discard_pct_per_dim": discard.tolist(),
                "uninteresting_pct_per_dim": pct["uninteresting"].tolist(),
                "nmse_per_dim": errs,
            }
        )
    return rows
