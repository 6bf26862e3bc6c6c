"""Vital-sign inputs: a synthetic generator and CSV loaders.

Series are ``(T, K)`` float arrays indexed by step, with NaN marking a reading
that is absent from the file.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from wban.core import CSV_HEADER, SensorTopology

# name, mean, standard deviation, display resolution
VITALS: tuple[tuple[str, float, float, float], ...] = (
    ("RESP", 18.0, 3.0, 1.0),
    ("BP-S", 120.0, 10.0, 1.0),
    ("BP-D", 75.0, 7.0, 1.0),
    ("SpO2", 97.0, 1.5, 1.0),
    ("HR", 80.0, 8.0, 1.0),
    ("PULSE", 80.0, 8.0, 1.0),
)
VITAL_NAMES = tuple(v[0] for v in VITALS)

# Column aliases seen in MIMIC numeric exports.
MIMIC_ALIASES = {
    "RESP": "RESP",
    "RR": "RESP",
    "ABPSYS": "BP-S",
    "ABP SYS": "BP-S",
    "NBPSYS": "BP-S",
    "BP-S": "BP-S",
    "ABPDIAS": "BP-D",
    "ABP DIAS": "BP-D",
    "NBPDIAS": "BP-D",
    "BP-D": "BP-D",
    "SPO2": "SpO2",
    "%SPO2": "SpO2",
    "HR": "HR",
    "PULSE": "PULSE",
}


class ParseError(ValueError):
    def __init__(self, line: int, column: str | int | None, reason: str) -> None:
        where = f"line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Per-dimension series on a common step axis.

    ``t0`` is the step of row 0, so row ``i`` is step ``t0 + i``.
    """

    series: np.ndarray
    topology: SensorTopology
    t0: int = 0

    @property
    def names(self) -> tuple[str, ...]:
        return self.topology.names

    @property
    def n_steps(self) -> int:
        return self.series.shape[0]

    def with_series(self, series: np.ndarray) -> Dataset:
        return Dataset(series, self.topology, self.t0)


def synthetic_vitals(
    n_steps: int,
    seed: int = 0,
    noise_frac: float = 0.05,
    tau_s: float = 900.0,
    resolution: bool = False,
    vitals: Sequence[tuple[str, float, float, float]] = VITALS,
) -> Dataset:
    """Smooth, low-variance vital signs sampled at 1 Hz.

    Each channel is its mean plus a slow Ornstein-Uhlenbeck drift (time
    constant ``tau_s``) and a multi-hour sinusoid, both scaled by the channel's
    standard deviation, plus white noise of ``noise_frac`` standard deviations.
    PULSE follows HR's drift, as an oximeter pulse tracks the ECG rate.

    Args:
        resolution: Round each channel to its display resolution, as bedside
            monitors export integers.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_steps)
    a = math.exp(-1.0 / tau_s)
    drifts = {}
    out = np.empty((n_steps, len(vitals)))
    for d, (name, mean, sd, res) in enumerate(vitals):
        if name == "PULSE" and "HR" in drifts:
            drift = drifts["HR"]
        else:
            shocks = rng.normal(size=n_steps) * math.sqrt(1.0 - a * a)
            drift = np.empty(n_steps)
            level = rng.normal()
            for i, e in enumerate(shocks.tolist()):
                level = a * level + e
                drift[i] = level
            drift += 0.4 * np.sin(2 * np.pi * t / (3600 * rng.uniform(1, 3)) + rng.uniform(0, 2 * np.pi))
        drifts[name] = drift
        x = mean + sd * 0.8 * drift + sd * noise_frac * rng.normal(size=n_steps)
        out[:, d] = np.round(x / res) * res if resolution else x
    topology = SensorTopology.flat([v[0] for v in vitals])
    return Dataset(out, topology)


def _parse_float(text: str, line: int, column: str) -> float:
    text = text.strip()
    if text in ("", "-", "NA", "NaN", "nan"):
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, column, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(line, column, f"non-finite value {text!r}")
    return value


def _parse_step(text: str, line: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, "t", f"bad time step {text!r}") from None
    if value < 0 or value != int(value):
        raise ParseError(line, "t", f"time step must be a non-negative integer, got {text!r}")
    return int(value)


def _assemble(
    rows: dict[int, list[float]], n_dims: int
) -> tuple[np.ndarray, int]:
    t0, t1 = min(rows), max(rows)
    series = np.full((t1 - t0 + 1, n_dims), np.nan)
    for t, values in rows.items():
        series[t - t0] = values
    return series, t0


def read_wide_csv(path: str | Path) -> Dataset:
    """Load ``t,<attr>,<attr>,...``; every column after ``t`` is one sensor."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise EmptyInput(f"{path}: no header")
        header = [h.strip() for h in header]
        if header[0] != "t" or len(header) < 2:
            raise ParseError(1, None, f"expected 't' followed by attribute columns, got {header}")
        names = header[1:]
        rows: dict[int, list[float]] = {}
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(line, None, f"expected {len(header)} fields, got {len(row)}")
            t = _parse_step(row[0], line)
            if t in rows:
                raise ParseError(line, "t", f"duplicate time step {t}")
            rows[t] = [_parse_float(v, line, names[i]) for i, v in enumerate(row[1:])]
    if not rows:
        raise EmptyInput(f"{path}: header only")
    series, t0 = _assemble(rows, len(names))
    return Dataset(series, SensorTopology.flat(names), t0)


def read_narrow_csv(path: str | Path, names: Sequence[str] | None = None) -> Dataset:
    """Load one reading per row, ``t,sensor_id,attribute_id,value``."""
    readings: list[tuple[int, int, int, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ParseError(1, None, f"expected header {','.join(CSV_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(line, None, f"expected 4 fields, got {len(row)}")
            t = _parse_step(row[0], line)
            try:
                i, j = int(row[1]), int(row[2])
            except ValueError:
                raise ParseError(line, "sensor_id/attribute_id", "ids must be integers") from None
            if i < 1 or j < 1:
                raise ParseError(line, "sensor_id/attribute_id", "ids are 1-based")
            value = _parse_float(row[3], line, "value")
            if math.isnan(value):
                continue
            readings.append((t, i, j, value))
    if not readings:
        raise EmptyInput(f"{path}: no readings")
    n_sensors = max(r[1] for r in readings)
    counts = [0] * n_sensors
    for _, i, j, _ in readings:
        counts[i - 1] = max(counts[i - 1], j)
    if any(k == 0 for k in counts):
        missing = [i + 1 for i, k in enumerate(counts) if k == 0]
        raise ParseError(1, None, f"sensors {missing} have no readings")
    topology = SensorTopology(tuple(counts), tuple(names) if names else ())
    t0 = min(r[0] for r in readings)
    series = np.full((max(r[0] for r in readings) - t0 + 1, topology.n_dims), np.nan)
    for t, i, j, value in readings:
        series[t - t0, topology.dimension_index(i, j)] = value
    return Dataset(series, topology, t0)


def ingest(path: str | Path) -> Dataset:
    """Load a wide or narrow vitals CSV, chosen by its header."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.strip():
        raise EmptyInput(f"{path}: empty file")
    if tuple(h.strip() for h in first.split(",")) == CSV_HEADER:
        return read_narrow_csv(path)
    return read_wide_csv(path)


def write_wide_csv(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(("t",) + dataset.names) + "\n")
        for i, row in enumerate(dataset.series.tolist()):
            cells = ["" if v != v else repr(v) for v in row]
            fh.write(f"{dataset.t0 + i}," + ",".join(cells) + "\n")


_CLOCK = re.compile(r"\[?(\d+):(\d{2}):(\d{2}(?:\.\d+)?)")


def _elapsed_seconds(text: str) -> float | None:
    text = text.strip().strip("'\"")
    try:
        return float(text)
    except ValueError:
        pass
    m = _CLOCK.match(text)
    if m:
        h, mnt, s = m.groups()
        return int(h) * 3600 + int(mnt) * 60 + float(s)
    return None


def load_mimic_numerics(path: str | Path, columns: Sequence[str] = VITAL_NAMES) -> Dataset:
    """Load a MIMIC numerics export (e.g. PhysioNet ``rdsamp -c``) into steps.

    The first column is elapsed time, either seconds or ``hh:mm:ss``; an optional
    units row after the header is skipped. Channel names are mapped through
    :data:`MIMIC_ALIASES` and only ``columns`` are kept, in that order. Wall-clock
    times that wrap past midnight are unwrapped. Samples are placed on the
    1-second grid by rounding.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise EmptyInput(f"{path}: no header")
        canon = [MIMIC_ALIASES.get(h.strip().strip("'\"").upper()) for h in header]
        missing = [c for c in columns if c not in canon]
        if missing:
            raise ParseError(1, None, f"columns {missing} not found in {header}")
        pick = [canon.index(c) for c in columns]
        rows: dict[int, list[float]] = {}
        offset = 0.0
        prev = None
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            elapsed = _elapsed_seconds(row[0])
            if elapsed is None:
                if line == 2:
                    continue  # units row
                raise ParseError(line, header[0], f"bad time {row[0]!r}")
            if prev is not None and elapsed + offset < prev:
                offset += 86400.0
            elapsed += offset
            prev = elapsed
            values = []
            for k in pick:
                text = row[k] if k < len(row) else ""
                values.append(_parse_float(text.strip().strip("'\""), line, header[k]))
            rows[int(round(elapsed))] = values
    if not rows:
        raise EmptyInput(f"{path}: no samples")
    series, _ = _assemble(rows, len(columns))
    return Dataset(series, SensorTopology.flat(columns), 0)
