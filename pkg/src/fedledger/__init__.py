"""Blockchain-mediated federated incremental learning, simulated at desk scale.

Sensors secret-share batches to learner nodes, nodes train an incremental
prototype classifier, and a serialized in-process ledger gates and records
prototype exchange with exact gas accounting.
"""

__version__ = "0.1.0"

from .ilvq import IlvqModel, Prototype, Sample, TrainOutcome
from .ledger import Address, GasSchedule, Ledger, gas_to_eth
from .secure_agg import AggregationSession, QuantizationConfig, ShareVector
from .sim import AttackSpec, Simulation, SimulationConfig, run_experiment

__all__ = [
    "IlvqModel",
    "Prototype",
    "Sample",
    "TrainOutcome",
    "Address",
    "GasSchedule",
    "Ledger",
    "gas_to_eth",
    "AggregationSession",
    "QuantizationConfig",
    "ShareVector",
    "AttackSpec",
    "Simulation",
    "SimulationConfig",
    "run_experiment",
]
