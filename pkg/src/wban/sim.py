"""End-to-end experiment runs.

A run pushes every sensor stream through its filter, rebuilds the gateway
view by carry-forward, scores it with the streaming forest, prices the radio
traffic and writes every artifact to one output directory. Runs are
deterministic for a given config: artifacts carry no timestamps.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from wban import datasets
from wban.core import Decision, SensorTopology, enumerate_dimensions
from wban.datasets import Dataset
from wban.energy import EnergyLedger, savings_report
from wban.evaluation import (
    InjectionSpec,
    classification_table,
    confusion,
    epsilon_sweep,
    fpr_at_full_recall,
    inject_anomalies,
    roc_auc,
)
from wban.iforest import StreamTooShort, Tier2Params, alarm_intervals, process_stream
from wban.lpu import reconstruct_series
from wban.tier1 import (
    DECISION_CODES,
    MISSING,
    FilterParams,
    ack_bytes,
    filter_matrix,
    transmitted_values,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

# Calibrated so 25,000 assessments come to ~1.85e6 instructions.
INSTRUCTIONS_PER_ASSESSMENT = 74
DEFAULT_EPSILON_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))
CODE_NAMES = {code: decision.value for decision, code in DECISION_CODES.items()}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_steps: int = 20_000
    noise_frac: float = 0.05
    tau_s: float = 900.0
    resolution: bool = False


@dataclass(frozen=True)
class EnergyDefaults:
    voltage_V: float = 3.0
    bytes_per_datapoint: int = 4
    instruction_energy_J: float = 2.15e-9
    instructions_per_assessment: int = INSTRUCTIONS_PER_ASSESSMENT

    def ledger(self, **counts: int) -> EnergyLedger:
        return EnergyLedger(
            voltage_V=self.voltage_V,
            bytes_per_datapoint=self.bytes_per_datapoint,
            instruction_energy_J=self.instruction_energy_J,
            **counts,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs.

    ``input_path`` of ``None`` means the bundled synthetic generator. Sensor
    grouping comes from ``sensors`` (lists of attribute names); by default each
    attribute is its own sensor.

    ``injection_stage`` places synthetic anomalies either in the reconstructed
    stream the detector sees (``"gateway"``) or in the raw readings before the
    sensor filter (``"sensor"``), where large offsets are usually dropped as
    faults.
    """

    input_path: Path | None = None
    input_format: str = "auto"
    synthetic: SyntheticSpec = SyntheticSpec()
    sensors: tuple[tuple[str, ...], ...] | None = None
    filter: FilterParams = FilterParams()
    filter_overrides: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    tier2: Tier2Params = Tier2Params()
    injection: InjectionSpec | None = None
    injection_stage: str = "gateway"
    energy: EnergyDefaults = EnergyDefaults()
    out_dir: Path = Path("out")
    seed: int = 0
    epsilon_grid: tuple[float, ...] = DEFAULT_EPSILON_GRID

    def __post_init__(self) -> None:
        if self.injection_stage not in ("gateway", "sensor"):
            raise ConfigError(f"injection stage must be gateway or sensor, got {self.injection_stage!r}")

    def filter_params_for(self, names: Sequence[str]) -> list[FilterParams]:
        unknown = sorted(set(self.filter_overrides) - set(names))
        if unknown:
            raise ConfigError(f"filter overrides for unknown attributes: {unknown}")
        out = []
        for name in names:
            try:
                out.append(replace(self.filter, **self.filter_overrides.get(name, {})))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"filter override for {name}: {exc}") from exc
        return out

    def with_seed(self, seed: int) -> ExperimentConfig:
        """Propagate one seed to every randomized stage."""
        injection = replace(self.injection, rng_seed=seed) if self.injection else None
        return replace(self, seed=seed, tier2=replace(self.tier2, rng_seed=seed), injection=injection)


def _build(cls, table: Mapping[str, Any], section: str):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {unknown}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def config_from_dict(raw: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config from parsed TOML.

    Recognized tables: ``[input]``, ``[synthetic]``, ``[topology]``,
    ``[filter]`` (with ``[filter.overrides.<attr>]``), ``[tier2]``,
    ``[injection]`` and ``[energy]``; top-level ``seed``, ``out`` and
    ``epsilon_grid``. Seeds in sub-tables default to the top-level seed.
    """
    raw = dict(raw)
    known = {"seed", "out", "epsilon_grid", "input", "synthetic", "topology",
             "filter", "tier2", "injection", "energy"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    base_dir = base_dir or Path(".")
    seed = int(raw.get("seed", 0))

    inp = dict(raw.get("input", {}))
    input_path = inp.pop("path", None)
    input_format = inp.pop("format", "auto")
    if inp:
        raise ConfigError(f"[input] unknown keys: {sorted(inp)}")
    if input_format not in ("auto", "wide", "narrow", "mimic"):
        raise ConfigError(f"[input] format must be auto/wide/narrow/mimic, got {input_format!r}")

    filt = dict(raw.get("filter", {}))
    overrides = filt.pop("overrides", {})
    if "reset_period_hours" in filt:
        filt["reset_period_steps"] = int(round(float(filt.pop("reset_period_hours")) * 3600))

    tier2 = {"rng_seed": seed, **raw.get("tier2", {})}
    injection = raw.get("injection")
    stage = "gateway"
    if injection is not None:
        injection = dict(injection)
        stage = injection.pop("stage", stage)
        injection = _build(InjectionSpec, {"rng_seed": seed, **injection}, "injection")

    sensors = raw.get("topology", {}).get("sensors")
    grid = raw.get("epsilon_grid", DEFAULT_EPSILON_GRID)
    return ExperimentConfig(
        input_path=(base_dir / input_path) if input_path else None,
        input_format=input_format,
        synthetic=_build(SyntheticSpec, raw.get("synthetic", {}), "synthetic"),
        sensors=tuple(tuple(s) for s in sensors) if sensors else None,
        filter=_build(FilterParams, filt, "filter"),
        filter_overrides={k: dict(v) for k, v in overrides.items()},
        tier2=_build(Tier2Params, tier2, "tier2"),
        injection=injection,
        injection_stage=stage,
        energy=_build(EnergyDefaults, raw.get("energy", {}), "energy"),
        out_dir=Path(raw.get("out", "out")),
        seed=seed,
        epsilon_grid=tuple(float(e) for e in grid),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.input_path is None:
        s = config.synthetic
        data = datasets.synthetic_vitals(
            s.n_steps, seed=config.seed, noise_frac=s.noise_frac,
            tau_s=s.tau_s, resolution=s.resolution,
        )
    elif config.input_format == "mimic":
        data = datasets.load_mimic_numerics(config.input_path)
    elif config.input_format == "narrow":
        data = datasets.read_narrow_csv(config.input_path)
    elif config.input_format == "wide":
        data = datasets.read_wide_csv(config.input_path)
    else:
        data = datasets.ingest(config.input_path)
    if config.sensors:
        return regroup(data, config.sensors)
    return data


def regroup(data: Dataset, sensors: Sequence[Sequence[str]]) -> Dataset:
    """Reorder columns so attributes of one sensor are adjacent."""
    flat = [name for group in sensors for name in group]
    missing = sorted(set(flat) - set(data.names))
    if missing:
        raise ConfigError(f"topology names attributes not in the input: {missing}")
    if len(set(flat)) != len(flat):
        raise ConfigError("an attribute is assigned to more than one sensor")
    cols = [data.names.index(name) for name in flat]
    topology = SensorTopology(tuple(len(g) for g in sensors), tuple(flat))
    return Dataset(data.series[:, cols], topology, data.t0)


@dataclass
class AttributeCounts:
    name: str
    sensor_id: int
    attribute_id: int
    total: int
    transmitted: int
    discarded_uninteresting: int
    discarded_faulty: int

    @property
    def discard_pct(self) -> float:
        return 100.0 * (self.total - self.transmitted) / self.total if self.total else 0.0

    @property
    def uninteresting_pct(self) -> float:
        return 100.0 * self.discarded_uninteresting / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {**asdict(self), "discard_pct": self.discard_pct,
                "uninteresting_pct": self.uninteresting_pct}


@dataclass
class RunReport:
    """Outcome of one run. ``duration_s`` is reported but never written to disk."""

    mode: str
    attributes: list[AttributeCounts]
    energy: dict
    tier2: dict
    detection: dict | None
    alarms: list[tuple[int, int]]
    duration_s: float = 0.0
    files: list[str] = field(default_factory=list)

    @property
    def total_readings(self) -> int:
        return sum(a.total for a in self.attributes)

    @property
    def transmitted(self) -> int:
        return sum(a.transmitted for a in self.attributes)

    def to_dict(self) -> dict:
        total = self.total_readings
        return {
            "mode": self.mode,
            "attributes": [a.to_dict() for a in self.attributes],
            "totals": {
                "readings": total,
                "transmitted": self.transmitted,
                "discard_pct": 100.0 * (total - self.transmitted) / total if total else 0.0,
                "average_uninteresting_pct": float(
                    np.mean([a.uninteresting_pct for a in self.attributes])
                ),
            },
            "energy": self.energy,
            "tier2": self.tier2,
            "detection": self.detection,
            "alarms": [list(a) for a in self.alarms],
        }


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _write_decisions(path: Path, data: Dataset, codes: np.ndarray, series: np.ndarray) -> None:
    dims = enumerate_dimensions(data.topology)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,sensor_id,attribute_id,value,decision\n")
        values = series.tolist()
        code_rows = codes.tolist()
        for i, (row, crow) in enumerate(zip(values, code_rows)):
            t = data.t0 + i
            for (s, a), v, c in zip(dims, row, crow):
                if c != MISSING:
                    fh.write(f"{t},{s},{a},{v!r},{CODE_NAMES[c]}\n")


def _write_reconstructed(path: Path, t0: int, values: np.ndarray, mask: np.ndarray) -> None:
    K = values.shape[1]
    weights = 1 << np.arange(K)
    bits = (mask.astype(np.int64) * weights).sum(axis=1).tolist()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["t"] + [f"dim_{d}" for d in range(K)] + ["mask_bits"]) + "\n")
        for i, (row, b) in enumerate(zip(values.tolist(), bits)):
            fh.write(f"{t0 + i}," + ",".join(repr(v) for v in row) + f",{b}\n")


def run_experiment(
    config: ExperimentConfig, bypass_filter: bool = False, write: bool = True
) -> RunReport:
    """Run the whole pipeline and write artifacts to ``config.out_dir``.

    Args:
        bypass_filter: Transmit every reading (the no-filter baseline).
        write: Skip all file output when False.
    """
    started = time.perf_counter()
    data = load_dataset(config)
    names = data.names
    params = config.filter_params_for(names)

    labels = None
    series = data.series
    at_sensor = config.injection is not None and config.injection_stage == "sensor"
    if at_sensor:
        series, labels = inject_anomalies(series, config.injection)

    codes = filter_matrix(series, params, bypass=bypass_filter)
    sent = transmitted_values(series, codes)
    values, received_mask, first = reconstruct_series(sent)
    if config.injection is not None and not at_sensor and len(values):
        values, lab = inject_anomalies(values, config.injection)
        labels = np.zeros(data.n_steps, dtype=bool)
        labels[first:] = lab

    try:
        scored = list(process_stream(values, config.tier2))
        tier2 = {"status": "ok", "first_step": data.t0 + first, "scored": len(scored)}
    except StreamTooShort as exc:
        scored = []
        tier2 = {"status": "stream_too_short", "first_step": data.t0 + first,
                 "received": exc.received, "omega": exc.omega, "scored": 0}
    steps = np.array([data.t0 + first + p.t for p in scored], dtype=np.int64)
    scores = np.array([p.score for p in scored])
    flags = np.array([p.is_anomaly for p in scored], dtype=bool)
    alarms = alarm_intervals(replace(p, t=int(t)) for p, t in zip(scored, steps))
    tier2["flagged"] = int(flags.sum())

    detection = None
    roc = None
    if labels is not None and len(scored):
        lab = labels[first : first + len(scored)]
        table = classification_table(confusion(flags, lab))
        detection = {"classes": table, "evaluated_points": int(len(lab))}
        if lab.any() and not lab.all():
            roc = roc_auc(scores, lab)
            detection["auc"] = roc.auc
            detection["fpr_at_full_recall"] = fpr_at_full_recall(roc)

    dims = enumerate_dimensions(data.topology)
    attrs = []
    for d, name in enumerate(names):
        col = codes[:, d]
        attrs.append(AttributeCounts(
            name=name, sensor_id=dims[d][0], attribute_id=dims[d][1],
            total=int(np.sum(col != MISSING)),
            transmitted=int(np.sum(col == DECISION_CODES[Decision.TRANSMIT])),
            discarded_uninteresting=int(np.sum(col == DECISION_CODES[Decision.DISCARD_UNINTERESTING])),
            discarded_faulty=int(np.sum(col == DECISION_CODES[Decision.DISCARD_FAULTY])),
        ))
    energy = energy_summary(config, data, attrs, params, bypass_filter)

    report = RunReport(
        mode="baseline" if bypass_filter else "filtered",
        attributes=attrs, energy=energy, tier2=tier2,
        detection=detection, alarms=alarms,
    )
    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", report.to_dict())
        _write_json(out / "energy.json", energy)
        with open(out / "scores.csv", "w", encoding="utf-8") as fh:
            fh.write("t,score,is_anomaly\n")
            for t, s, f in zip(steps.tolist(), scores.tolist(), flags.tolist()):
                fh.write(f"{t},{s!r},{int(f)}\n")
        _write_json(out / "scores.json", [
            {"t": t, "score": s, "is_anomaly": f}
            for t, s, f in zip(steps.tolist(), scores.tolist(), flags.tolist())
        ])
        with open(out / "alarms.csv", "w", encoding="utf-8") as fh:
            fh.write("t_start,t_end\n")
            fh.writelines(f"{a},{b}\n" for a, b in alarms)
        _write_decisions(out / "decisions.csv", data, codes, series)
        _write_reconstructed(out / "reconstructed.csv", data.t0 + first, values, received_mask)
        files = ["report.json", "energy.json", "scores.csv", "scores.json", "alarms.csv",
                 "decisions.csv", "reconstructed.csv"]
        if roc is not None:
            with open(out / "roc.csv", "w", encoding="utf-8") as fh:
                fh.write("fpr,tpr\n")
                fh.writelines(f"{f!r},{t!r}\n" for f, t in zip(roc.fpr.tolist(), roc.tpr.tolist()))
            files.append("roc.csv")
        if labels is not None:
            with open(out / "labels.csv", "w", encoding="utf-8") as fh:
                fh.write("t,label\n")
                fh.writelines(f"{data.t0 + i},{int(v)}\n" for i, v in enumerate(labels.tolist()))
            files.append("labels.csv")
        report.files = files
    report.duration_s = time.perf_counter() - started
    logger.info("%s run finished in %.2fs", report.mode, report.duration_s)
    return report


def energy_summary(
    config: ExperimentConfig,
    data: Dataset,
    attrs: Sequence[AttributeCounts],
    params: Sequence[FilterParams],
    bypass_filter: bool,
) -> dict:
    """Price the run against sending every reading, per sensor and overall."""
    e = config.energy
    dims = enumerate_dimensions(data.topology)
    per_sensor = []
    total = e.ledger()
    baseline_points = 0
    for s in range(1, data.topology.n_sensors + 1):
        members = [d for d, (sid, _) in enumerate(dims) if sid == s]
        readings = sum(attrs[d].total for d in members)
        sent = sum(attrs[d].transmitted for d in members)
        if bypass_filter:
            instructions, acks = 0, 0
        else:
            instructions = readings * e.instructions_per_assessment
            acks = ack_bytes(data.n_steps, params[members[0]])
        ledger = e.ledger(transmitted_points=sent, instructions_executed=instructions, ack_bytes=acks)
        rep = savings_report(readings, sent, instructions, acks, ledger)
        per_sensor.append({
            "sensor_id": s,
            "attributes": [attrs[d].name for d in members],
            **rep.to_dict(),
        })
        total = total + ledger
        baseline_points += readings
    overall = savings_report(
        baseline_points, total.transmitted_points, total.instructions_executed,
        total.ack_bytes, total,
    )
    return {**overall.to_dict(), "per_sensor": per_sensor}


def baseline_run(config: ExperimentConfig, write: bool = True) -> RunReport:
    """Same pipeline with the sensor filter replaced by transmit-always."""
    return run_experiment(config, bypass_filter=True, write=write)


def run_sweep(config: ExperimentConfig, write: bool = True) -> list[dict]:
    """Epsilon trade-off over ``config.epsilon_grid``; writes ``sweep.csv``."""
    data = load_dataset(config)
    series = data.series
    if config.injection is not None:
        series, _ = inject_anomalies(series, config.injection)
    rows = epsilon_sweep(series, config.epsilon_grid, config.filter)
    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epsilon", "discard_pct", "nmse", "uninteresting_pct", "faulty_pct"])
            for r in rows:
                writer.writerow([repr(r["epsilon"]), repr(r["discard_pct"]), repr(r["nmse"]),
                                 repr(r["uninteresting_pct"]), repr(r["faulty_pct"])])
    return rows
