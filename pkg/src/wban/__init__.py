"""Energy-aware body-sensor telemetry.

Sensor-side filtering of uninteresting and faulty vital-sign readings,
carry-forward reconstruction at the gateway, streaming isolation-forest
anomaly detection, and the energy and evaluation tooling around them.
"""

from wban.core import (
    Decision,
    Reading,
    SensorTopology,
    TimeStepVector,
    enumerate_dimensions,
)
from wban.energy import EnergyLedger, savings_report
from wban.evaluation import InjectionSpec, inject_anomalies, roc_auc
from wban.iforest import ForestBuffer, Tier2Params, process_stream
from wban.tier1 import FilterParams, FilterState, assess

__all__ = [
    "Decision",
    "EnergyLedger",
    "FilterParams",
    "FilterState",
    "ForestBuffer",
    "InjectionSpec",
    "Reading",
    "SensorTopology",
    "Tier2Params",
    "TimeStepVector",
    "assess",
    "enumerate_dimensions",
    "inject_anomalies",
    "process_stream",
    "roc_auc",
    "savings_report",
]

__version__ = "0.1.0"
