"""Cooperative emission of a dense gas of two-level atoms.

The emission rate of each atom is solved self-consistently from the field
radiated by the whole sample, then the populations and the pair correlation
are integrated in time.
"""

__version__ = "0.1.0"

from .analysis import (burst_metrics, compare_q0_modes, instantaneous_spectrum,
                       linewidth_trace, phase_traces, subradiance_metrics)
from .config import RunConfig
from .dynamics import IntegratorConfig, run, run_driven
from .errors import CoopDecayError
from .model import AtomicState, Q0Mode, RateSet, SystemParams, TimeSeries
from .rates import solve_gamma

__all__ = [
    "AtomicState", "CoopDecayError", "IntegratorConfig", "Q0Mode", "RateSet", "RunConfig",
    "SystemParams", "TimeSeries", "burst_metrics", "compare_q0_modes",
    "instantaneous_spectrum", "linewidth_trace", "phase_traces", "run", "run_driven",
    "solve_gamma", "subradiance_metrics", "__version__",
]
