import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wban.evaluation import (
    ConfusionCounts,
    DegenerateMAD,
    DegenerateSignal,
    InjectionSpec,
    LengthMismatch,
    SingleClass,
    carry_forward,
    classification_table,
    confusion,
    epsilon_sweep,
    fpr_at_full_recall,
    inject_anomalies,
    label_faults_mad,
    nmse,
    precision_recall_f1,
    roc_auc,
)
from wban.tier1 import FilterParams


def mann_whitney_auc(scores, labels):
    stats = pytest.importorskip("scipy.stats")
    scores, labels = np.asarray(scores), np.asarray(labels, bool)
    u = stats.mannwhitneyu(scores[labels], scores[~labels]).statistic
    return u / (labels.sum() * (~labels).sum())


class TestInjection:
    def test_counts_and_offsets(self, rng):
        series = rng.normal(50, 4, size=(2000, 6))
        spec = InjectionSpec(rate=0.05, magnitude_sigma=6, dims_per_event=2, rng_seed=3)
        corrupted, labels = inject_anomalies(series, spec)
        assert labels.sum() == 100
        diff = corrupted - series
        changed = diff != 0
        assert (changed.sum(axis=1)[labels] == 2).all()
        assert not changed[~labels].any()
        sigma = series.std(axis=0)
        np.testing.assert_allclose(np.abs(diff[changed]), 6 * np.broadcast_to(sigma, diff.shape)[changed])

    def test_rate_floor(self, rng):
        _, labels = inject_anomalies(rng.normal(size=(999, 2)), InjectionSpec(rate=0.05))
        assert labels.sum() == 49

    def test_seeded(self, rng):
        series = rng.normal(size=(500, 3))
        a = inject_anomalies(series, InjectionSpec(rng_seed=7))
        b = inject_anomalies(series, InjectionSpec(rng_seed=7))
        np.testing.assert_array_equal(a[0], b[0])

    def test_too_many_dims(self, rng):
        with pytest.raises(ValueError):
            inject_anomalies(rng.normal(size=(10, 2)), InjectionSpec(dims_per_event=3))


class TestMad:
    def test_outlier(self):
        assert label_faults_mad([2, 4, 6, 8, 1000]).tolist() == [False] * 4 + [True]

    def test_degenerate(self):
        with pytest.warns(DegenerateMAD):
            flags = label_faults_mad([1, 1, 1, 1, 100])
        assert flags.tolist() == [False] * 4 + [True]

    def test_too_short(self):
        with pytest.raises(ValueError):
            label_faults_mad([1, 2])


class TestMetrics:
    def test_precision_recall(self):
        r = precision_recall_f1(ConfusionCounts(tp=90, fp=10, fn=10, tn=890))
        assert r["precision"] == pytest.approx(0.9)
        assert r["recall"] == pytest.approx(0.9)
        assert r["f1"] == pytest.approx(0.9)
        assert not r["degenerate"]

    def test_f1_harmonic_mean(self):
        p, r = 0.72, 0.99
        assert 2 * p * r / (p + r) == pytest.approx(0.8337, abs=1e-4)

    def test_degenerate(self):
        r = precision_recall_f1(ConfusionCounts(0, 0, 5, 5))
        assert r["precision"] == 0.0 and r["degenerate"]

    def test_confusion_and_table(self):
        c = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        assert c == ConfusionCounts(tp=2, fp=1, fn=1, tn=1)
        table = classification_table(c)
        assert table["1"]["support"] == 3 and table["0"]["support"] == 2
        assert table["avg / total"]["support"] == 5

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([1, 0], [1])


class TestRoc:
    def test_perfect(self):
        curve = roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert curve.auc == 1.0
        assert fpr_at_full_recall(curve) == 0.0

    def test_all_tied(self):
        assert roc_auc([0.5] * 4, [1, 0, 1, 0]).auc == pytest.approx(0.5)

    def test_single_class(self):
        with pytest.raises(SingleClass):
            roc_auc([0.1, 0.2], [1, 1])

    @given(
        arrays(np.float64, 60, elements=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 1.0])),
        arrays(np.bool_, 60),
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_mann_whitney(self, scores, labels):
        if labels.all() or not labels.any():
            return
        assert roc_auc(scores, labels).auc == pytest.approx(mann_whitney_auc(scores, labels), abs=1e-12)

    @given(arrays(np.int64, 50, elements=st.integers(-30, 30)), arrays(np.bool_, 50))
    @settings(max_examples=100, deadline=None)
    def test_monotone_transform_invariant(self, scores, labels):
        if labels.all() or not labels.any():
            return
        a = roc_auc(scores, labels).auc
        b = roc_auc(np.exp(scores / 3.0) * 7 + 1, labels).auc
        assert a == pytest.approx(b, abs=1e-12)

    def test_random_scores(self, rng):
        labels = rng.random(10_000) < 0.3
        assert roc_auc(rng.random(10_000), labels).auc == pytest.approx(0.5, abs=0.05)

    def test_curve_monotone(self, rng):
        curve = roc_auc(rng.random(500), rng.random(500) < 0.2)
        assert curve.fpr[0] == 0 and curve.tpr[0] == 0
        assert curve.fpr[-1] == 1 and curve.tpr[-1] == 1
        assert (np.diff(curve.fpr) >= 0).all() and (np.diff(curve.tpr) >= 0).all()


class TestNmse:
    def test_identical(self, rng):
        x = rng.normal(size=100)
        assert nmse(x, x) == 0.0

    def test_mean_predictor(self, rng):
        x = rng.normal(size=100)
        assert nmse(x, np.full_like(x, x.mean())) == pytest.approx(1.0)

    def test_clipped(self, rng):
        x = rng.normal(size=100)
        assert nmse(x, -10 * x) == 1.0

    def test_constant_signal(self):
        with pytest.warns(DegenerateSignal):
            assert nmse([3.0, 3.0], [3.0, 3.0]) == 0.0

    def test_ignores_nan(self):
        assert nmse([1.0, 2.0, np.nan, 4.0], [1.0, 2.0, 0.0, 4.0]) == 0.0


def test_carry_forward():
    tx = np.array([[np.nan, 1.0], [2.0, np.nan], [np.nan, np.nan], [5.0, 3.0]])
    out = carry_forward(tx)
    np.testing.assert_array_equal(out[:, 1], [1.0, 1.0, 1.0, 3.0])
    assert np.isnan(out[0, 0])
    np.testing.assert_array_equal(out[1:, 0], [2.0, 2.0, 5.0])


class TestSweep:
    def test_rows_and_trend(self, rng):
        walk = 70 + np.cumsum(rng.normal(0, 0.05, size=(3000, 2)), axis=0)
        rows = epsilon_sweep(walk, [0.0, 0.2, 0.8])
        assert [r["epsilon"] for r in rows] == [0.0, 0.2, 0.8]
        assert rows[0]["uninteresting_pct"] == 0.0
        assert rows[0]["discard_pct"] <= rows[1]["discard_pct"] <= rows[2]["discard_pct"]
        assert all(0.0 <= r["nmse"] <= 1.0 for r in rows)
        assert len(rows[0]["nmse_per_dim"]) == 2

    def test_empty_grid(self, rng):
        with pytest.raises(ValueError):
            epsilon_sweep(rng.normal(size=(10, 1)), [])

    def test_respects_base_params(self, rng):
        series = 70 + rng.normal(size=(200, 1))
        rows = epsilon_sweep(series, [0.5], FilterParams(warmup_count=1000))
        assert rows[0]["discard_pct"] == 0.0
