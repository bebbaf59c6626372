"""Benchmark harness: presets, references, sweeps and the ``mzbench`` CLI."""

from .config import RunConfig
from .experiments import ExperimentResult, fit_slope, run_convergence, run_single, run_table
from .presets import make_problem, preset_double_well_chirp
from .reference import make_reference

__all__ = [
    "ExperimentResult", "RunConfig", "fit_slope", "make_problem", "make_reference",
    "preset_double_well_chirp", "run_convergence", "run_single", "run_table",
]
