from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wban.evaluation import InjectionSpec
from wban.iforest import Tier2Params
from wban.sim import (
    ConfigError,
    ExperimentConfig,
    SyntheticSpec,
    baseline_run,
    config_from_dict,
    load_config,
    run_experiment,
    run_sweep,
)
from wban.tier1 import FilterParams

SMALL = ExperimentConfig(
    synthetic=SyntheticSpec(n_steps=3000),
    tier2=Tier2Params(omega=256, n_tree=20, k_tree=5),
)


def small(tmp_path, **kwargs):
    return replace(SMALL, out_dir=tmp_path / "out", **kwargs)


def assert_partition(report):
    for a in report.attributes:
        assert a.transmitted + a.discarded_uninteresting + a.discarded_faulty == a.total


def test_artifacts_and_partition(tmp_path):
    report = run_experiment(small(tmp_path, injection=InjectionSpec(rate=0.05)))
    assert_partition(report)
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert {"report.json", "energy.json", "scores.csv", "alarms.csv", "decisions.csv",
            "roc.csv", "labels.csv", "reconstructed.csv"} <= names
    assert report.tier2["status"] == "ok"
    assert 0 <= report.detection["auc"] <= 1


def test_epsilon_zero(tmp_path):
    config = small(tmp_path, filter=FilterParams(epsilon=0.0))
    report = run_experiment(config)
    assert all(a.discarded_uninteresting == 0 for a in report.attributes)
    assert report.tier2["scored"] > 0


def test_default_discard_rate(tmp_path):
    report = run_experiment(small(tmp_path))
    assert all(a.uninteresting_pct >= 60 for a in report.attributes)


def test_baseline_transmits_everything(tmp_path):
    report = baseline_run(small(tmp_path))
    assert all(a.transmitted == a.total for a in report.attributes)
    assert report.energy["saving_fraction"] == 0.0
    assert report.mode == "baseline"


def test_single_attribute_baseline_energy(tmp_path):
    path = tmp_path / "hr.csv"
    path.write_text("t,HR\n" + "".join(f"{t},{80 + t % 7}\n" for t in range(25_000)))
    config = replace(SMALL, input_path=path, out_dir=tmp_path / "out")
    report = baseline_run(config, write=False)
    assert report.energy["baseline_J"] == pytest.approx(2.496, rel=1e-9)


def test_byte_identical(tmp_path):
    config = small(tmp_path, injection=InjectionSpec(rate=0.05))
    run_experiment(replace(config, out_dir=tmp_path / "a"))
    run_experiment(replace(config, out_dir=tmp_path / "b"))
    a_files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert a_files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in a_files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_seed_changes_output(tmp_path):
    a = run_experiment(small(tmp_path).with_seed(1), write=False)
    b = run_experiment(small(tmp_path).with_seed(2), write=False)
    assert a.energy != b.energy


def test_stream_too_short_is_reported(tmp_path):
    config = small(tmp_path, synthetic=SyntheticSpec(n_steps=100))
    report = run_experiment(config, write=False)
    assert report.tier2["status"] == "stream_too_short"


def test_sweep_writes_csv(tmp_path):
    rows = run_sweep(small(tmp_path, epsilon_grid=(0.1, 0.5)))
    assert len(rows) == 2
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "epsilon,discard_pct,nmse,uninteresting_pct,faulty_pct"
    assert len(lines) == 3


@given(
    eps=st.floats(0, 1.5),
    seed=st.integers(0, 10**6),
    warmup=st.integers(2, 60),
    l_th=st.floats(-6, -0.5),
)
@settings(max_examples=100, deadline=None)
def test_partition_invariant(tmp_path_factory, eps, seed, warmup, l_th):
    config = replace(
        SMALL,
        synthetic=SyntheticSpec(n_steps=400),
        filter=FilterParams(epsilon=eps, warmup_count=warmup, l_th=l_th, reset_period_steps=150),
        tier2=Tier2Params(omega=128, n_tree=5, k_tree=2),
    ).with_seed(seed)
    assert_partition(run_experiment(config, write=False))


class TestConfig:
    def test_toml(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(
            "seed = 7\nout = 'res'\n"
            "[filter]\nepsilon = 0.3\nreset_period_hours = 1\n"
            "[filter.overrides.HR]\nepsilon = 0.1\n"
            "[tier2]\nomega = 512\n"
            "[injection]\nrate = 0.02\nstage = 'sensor'\n"
            "[input]\npath = 'vitals.csv'\n"
        )
        config = load_config(path)
        assert config.seed == 7 and config.tier2.rng_seed == 7
        assert config.filter.epsilon == 0.3
        assert config.filter.reset_period_steps == 3600
        assert config.tier2.omega == 512
        assert config.injection.rate == 0.02 and config.injection.rng_seed == 7
        assert config.injection_stage == "sensor"
        assert config.input_path == tmp_path / "vitals.csv"
        params = config.filter_params_for(["RESP", "HR"])
        assert [p.epsilon for p in params] == [0.3, 0.1]

    @pytest.mark.parametrize(
        "raw",
        [
            {"bogus": 1},
            {"filter": {"epsilon": -1}},
            {"filter": {"nope": 1}},
            {"tier2": {"k_tree": 500}},
            {"input": {"format": "xml"}},
            {"injection": {"stage": "cloud"}},
        ],
    )
    def test_rejects(self, raw):
        with pytest.raises(ConfigError):
            config_from_dict(raw)

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("seed = = 3")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_override_unknown_attribute(self):
        config = config_from_dict({"filter": {"overrides": {"XYZ": {"epsilon": 0.1}}}})
        with pytest.raises(ConfigError):
            config.filter_params_for(["HR"])

    def test_topology_grouping(self, tmp_path):
        config = replace(small(tmp_path), sensors=(("BP-S", "BP-D"), ("HR",)))
        report = run_experiment(config, write=False)
        assert [(a.sensor_id, a.attribute_id) for a in report.attributes] == [(1, 1), (1, 2), (2, 1)]
        assert len(report.energy["per_sensor"]) == 2
