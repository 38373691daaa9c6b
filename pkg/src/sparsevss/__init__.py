"""Sparse variable step-size NLMS estimators for MIMO channels."""

__version__ = "0.1.0"

from .channel import MimoChannel, NoiseSpec, RegressorBank, SparseLink, assemble, generate_link, observe
from .estimators import AlgoConfig, FilterState, Variant, step
from .experiment import MseTrace, RunConfig, StepTrace, monte_carlo, mse, run_adaptation

__all__ = [
    "AlgoConfig", "FilterState", "Variant", "step",
    "MimoChannel", "NoiseSpec", "RegressorBank", "SparseLink", "assemble", "generate_link", "observe",
    "MseTrace", "RunConfig", "StepTrace", "monte_carlo", "mse", "run_adaptation",
]
