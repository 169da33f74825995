"""Coexistence throughput of dual-link (STR AP / NSTR client) and legacy
single-link Wi-Fi devices: coupled-chain analysis and a slot-level simulator.
"""

from .coupling import BusyAlign, PSet, SlotEventProfile, TauSet
from .errors import ConfigError, ConvergenceError, InconsistencyError, SingularModelError
from .params import (
    BackoffParams,
    PhyParams,
    ScenarioConfig,
    SlotDurations,
    compute_slot_durations,
    compute_t_data,
    load_config,
)
from .sim import SimStats, run_sim, trace_export
from .solver import (
    CouplingState,
    NthModel,
    SolverOptions,
    ThroughputReport,
    calibrate_aggregation,
    n_th,
    solve_fixed_point,
    solve_throughput,
    throughput,
)

__all__ = [
    "BackoffParams",
    "BusyAlign",
    "ConfigError",
    "ConvergenceError",
    "CouplingState",
    "InconsistencyError",
    "NthModel",
    "PhyParams",
    "PSet",
    "ScenarioConfig",
    "SimStats",
    "SingularModelError",
    "SlotDurations",
    "SlotEventProfile",
    "SolverOptions",
    "TauSet",
    "ThroughputReport",
    "calibrate_aggregation",
    "compute_slot_durations",
    "compute_t_data",
    "load_config",
    "n_th",
    "run_sim",
    "solve_fixed_point",
    "solve_throughput",
    "throughput",
    "trace_export",
]

__version__ = "0.1.0"
