"""Fractional white-noise calculus: fBm drivers, WIS integrals and SDE solvers."""
from .errors import (AccuracyError, ConfigurationError, ContractError, DivergenceError,
                     DomainError, FwnError, NumericError)
from .frackernel import HurstModel, c_h, k_h
from .fbmgen import Method, TimeGrid, generate
from .mcharness import ExperimentConfig, run_experiment
from .rng import BACKEND
from .sdesolve import SdeSpec, euler_solve, picard_solve

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "BACKEND", "ConfigurationError", "ContractError", "DivergenceError",
    "DomainError", "ExperimentConfig", "FwnError", "HurstModel", "Method", "NumericError",
    "SdeSpec", "TimeGrid", "c_h", "euler_solve", "generate", "k_h", "picard_solve",
    "run_experiment",
]
