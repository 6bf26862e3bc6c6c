"""Energy accounting for a Mica2-class sensor node.

Per-operation current draw and duration are kept as data (:data:`MICA2_TABLE`)
so the whole model can be re-priced for another radio by swapping the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

TRANSMIT_BYTE = "Transmit 1 byte"
RECEIVE_BYTE = "Receive 1 byte"


@dataclass(frozen=True)
class OperationCost:
    name: str
    time_s: float
    current_mA: float

    def __post_init__(self) -> None:
        if self.time_s < 0 or self.current_mA < 0:
            raise ValueError(f"{self.name}: time and current must be non-negative")


MICA2_TABLE: dict[str, OperationCost] = {
    op.name: op
    for op in (
        OperationCost("Initialize radio", 350e-6, 6),
        OperationCost("Turn on radio", 1.5e-3, 1),
        OperationCost("Switch to RX/TX", 250e-6, 15),
        OperationCost("Time to sample radio", 350e-6, 15),
        OperationCost("Evaluate radio sample", 100e-6, 6),
        OperationCost(RECEIVE_BYTE, 416e-6, 15),
        OperationCost(TRANSMIT_BYTE, 416e-6, 20),
        OperationCost("Sample sensors", 1.1, 20),
    )
}


def op_energy(op: OperationCost, voltage_V: float = 3.0) -> float:
    """Joules for one execution of ``op``: current x time x voltage."""
    return op.current_mA * 1e-3 * op.time_s * voltage_V


@dataclass
class EnergyLedger:
    """Counts of energy-relevant events plus the constants that price them.

    Ledgers for several sensors combine with ``+``.
    """

    transmitted_points: int = 0
    instructions_executed: int = 0
    ack_bytes: int = 0
    voltage_V: float = 3.0
    bytes_per_datapoint: int = 4
    instruction_energy_J: float = 2.15e-9
    table: Mapping[str, OperationCost] = field(default_factory=lambda: dict(MICA2_TABLE))

    def __post_init__(self) -> None:
        if min(self.transmitted_points, self.instructions_executed, self.ack_bytes) < 0:
            raise ValueError("ledger counts must be non-negative")
        if not self.voltage_V > 0:
            raise ValueError("voltage must be positive")

    @property
    def transmitted_bytes(self) -> int:
        return self.transmitted_points * self.bytes_per_datapoint

    @property
    def byte_energy_J(self) -> float:
        return op_energy(self.table[TRANSMIT_BYTE], self.voltage_V)

    def transmission_energy(self, n_points: int | None = None) -> float:
        n = self.transmitted_points if n_points is None else n_points
        if n < 0:
            raise ValueError("n_points must be non-negative")
        return n * self.bytes_per_datapoint * self.byte_energy_J

    def computation_energy(self, instructions: int | None = None) -> float:
        n = self.instructions_executed if instructions is None else instructions
        if n < 0:
            raise ValueError("instructions must be non-negative")
        return n * self.instruction_energy_J

    def ack_energy(self) -> float:
        return self.ack_bytes * self.byte_energy_J

    def total_energy(self) -> float:
        return self.transmission_energy() + self.computation_energy() + self.ack_energy()

    def __add__(self, other: EnergyLedger) -> EnergyLedger:
        return replace(
            self,
            transmitted_points=self.transmitted_points + other.transmitted_points,
            instructions_executed=self.instructions_executed + other.instructions_executed,
            ack_bytes=self.ack_bytes + other.ack_bytes,
        )


def transmission_energy(n_points: int, ledger: EnergyLedger | None = None) -> float:
    return (ledger or EnergyLedger()).transmission_energy(n_points)


def computation_energy(instructions: int, ledger: EnergyLedger | None = None) -> float:
    return (ledger or EnergyLedger()).computation_energy(instructions)


@dataclass(frozen=True)
class SavingsReport:
    baseline_J: float
    transmission_J: float
    computation_J: float
    ack_J: float

    @property
    def total_J(self) -> float:
        return self.transmission_J + self.computation_J + self.ack_J

    # Alias matching the filtered-run total.
    filtered_J = total_J

    @property
    def saving_fraction(self) -> float:
        if self.baseline_J == 0:
            return 0.0
        return 1.0 - self.total_J / self.baseline_J

    @property
    def negative_saving(self) -> bool:
        return self.total_J > self.baseline_J

    def to_dict(self) -> dict:
        return {
            "baseline_J": self.baseline_J,
            "transmission_J": self.transmission_J,
            "computation_J": self.computation_J,
            "ack_J": self.ack_J,
            "total_J": self.total_J,
            "saving_fraction": self.saving_fraction,
            "negative_saving": self.negative_saving,
        }


def savings_report(
    baseline_points: int,
    transmitted_points: int,
    instructions: int,
    ack_bytes: int = 0,
    ledger: EnergyLedger | None = None,
) -> SavingsReport:
    """Compare sending every reading against the filtered run.

    ``negative_saving`` is set, not raised, when filtering costs more than it
    saves.
    """
    if transmitted_points > baseline_points:
        raise ValueError("cannot transmit more points than the baseline")
    ledger = ledger or EnergyLedger()
    run = replace(
        ledger,
        transmitted_points=transmitted_points,
        instructions_executed=instructions,
        ack_bytes=ack_bytes,
    )
    return SavingsReport(
        baseline_J=ledger.transmission_energy(baseline_points),
        transmission_J=run.transmission_energy(),
        computation_J=run.computation_energy(),
        ack_J=run.ack_energy(),
    )
