"""Spatial food-land system simulator with policy scenario analysis."""

from .demand import Drivers, DriverCurves, builtin_drivers, load_drivers_csv
from .engine import EnsembleResult, RunRecord, delta_vs_baseline, run, run_ensemble
from .params import ConfigError, ModelError, ModelParams

__version__ = "0.1.0"
