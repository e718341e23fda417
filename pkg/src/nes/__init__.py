"""Natural evolution strategies for black-box optimization."""

from . import adaptation, benchmarks, distributions, engine, restarts, shaping, symmat
from .distributions import CauchyState, FullGaussianState, SeparableState
from .engine import AlgorithmConfig, GenerationRecord, RunResult, run
from .restarts import interleaved_runner, schedule_slices

__all__ = [
    "adaptation",
    "benchmarks",
    "distributions",
    "engine",
    "restarts",
    "shaping",
    "symmat",
    "AlgorithmConfig",
    "CauchyState",
    "FullGaussianState",
    "GenerationRecord",
    "RunResult",
    "SeparableState",
    "interleaved_runner",
    "run",
    "schedule_slices",
]

__version__ = "0.1.0"
