"""Shared domain types: readings, sensor topology, per-step vectors.

Time is an integer step counter (one reading per attribute per second), so a
duration of ``M`` hours is ``M * 3600`` steps.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

CSV_HEADER = ("t", "sensor_id", "attribute_id", "value")


class Decision(enum.Enum):
    """Outcome of assessing one reading at the sensor."""

    TRANSMIT = "transmit"
    DISCARD_UNINTERESTING = "uninteresting"
    DISCARD_FAULTY = "faulty"


class Source(enum.IntEnum):
    RECEIVED = 1
    CARRIED_FORWARD = 0


@dataclass(frozen=True)
class Reading:
    """One timestamped value of one attribute of one sensor.

    ``sensor_id`` and ``attribute_id`` are 1-based, ``t`` is in steps.
    """

    t: int
    sensor_id: int
    attribute_id: int
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "value", float(self.value))
        if self.t < 0:
            raise ValueError(f"t must be non-negative, got {self.t}")
        if self.sensor_id < 1 or self.attribute_id < 1:
            raise ValueError(
                f"sensor/attribute ids are 1-based, got ({self.sensor_id}, {self.attribute_id})"
            )
        if not math.isfinite(self.value):
            raise ValueError(f"reading value must be finite, got {self.value!r}")

    def to_csv_row(self) -> str:
        return f"{self.t},{self.sensor_id},{self.attribute_id},{self.value!r}"

    @classmethod
    def from_csv_row(cls, row: str) -> Reading:
        parts = row.strip().split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 4 fields, got {len(parts)}: {row!r}")
        t, sensor_id, attribute_id, value = parts
        return cls(int(t), int(sensor_id), int(attribute_id), float(value))


@dataclass(frozen=True)
class SensorTopology:
    """Which attributes each sensor measures.

    Args:
        attribute_counts: ``K_i`` for each sensor, in sensor order.
        names: Optional display name per attribute, in enumeration order.
    """

    attribute_counts: tuple[int, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        counts = tuple(int(k) for k in self.attribute_counts)
        if not counts:
            raise ValueError("topology needs at least one sensor")
        if any(k < 1 for k in counts):
            raise ValueError(f"every sensor needs K_i >= 1, got {counts}")
        object.__setattr__(self, "attribute_counts", counts)
        total = sum(counts)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"dim_{d}" for d in range(total)))
        elif len(self.names) != total:
            raise ValueError(f"expected {total} attribute names, got {len(self.names)}")
        else:
            object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def flat(cls, names: Sequence[str]) -> SensorTopology:
        """One single-attribute sensor per name."""
        return cls((1,) * len(names), tuple(names))

    @property
    def n_sensors(self) -> int:
        return len(self.attribute_counts)

    @property
    def n_dims(self) -> int:
        return sum(self.attribute_counts)

    def dimension_index(self, sensor_id: int, attribute_id: int) -> int:
        if not 1 <= sensor_id <= self.n_sensors:
            raise KeyError(f"unknown sensor {sensor_id}")
        if not 1 <= attribute_id <= self.attribute_counts[sensor_id - 1]:
            raise KeyError(f"sensor {sensor_id} has no attribute {attribute_id}")
        return sum(self.attribute_counts[: sensor_id - 1]) + attribute_id - 1


def enumerate_dimensions(topology: SensorTopology) -> list[tuple[int, int]]:
    """List ``(sensor_id, attribute_id)`` pairs in dimension order."""
    return [
        (i + 1, j + 1)
        for i, k in enumerate(topology.attribute_counts)
        for j in range(k)
    ]


@dataclass(frozen=True)
class TimeStepVector:
    """All ``K`` attribute values at one step, after LPU reconstruction."""

    t: int
    values: np.ndarray
    source_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("TimeStepVector values must be finite")
        values.flags.writeable = False
        if self.source_mask is None:
            mask = np.ones(values.shape, dtype=bool)
        else:
            mask = np.array(self.source_mask, dtype=bool)
            if mask.shape != values.shape:
                raise ValueError("source_mask must match values")
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "source_mask", mask)

    def source(self, d: int) -> Source:
        return Source.RECEIVED if self.source_mask[d] else Source.CARRIED_FORWARD


def write_readings(readings: Iterable[Reading], fh: io.TextIOBase) -> None:
    """Write readings in the narrow wire format (with header)."""
    fh.write(",".join(CSV_HEADER) + "\n")
    for r in readings:
        fh.write(r.to_csv_row() + "\n")


def read_readings(fh: Iterable[str]) -> Iterator[Reading]:
    """Parse the narrow wire format; the first line must be the header."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)!r}, got {header!r}")
    for row in reader:
        if not row:
            continue
        yield Reading.from_csv_row(",".join(row))
