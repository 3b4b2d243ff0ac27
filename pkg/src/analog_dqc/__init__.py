"""Differentiable quantum circuits and extremal learning on a simulated Rydberg atom pair."""

from .config import Problem, load_problem
from .pipeline import EXACT, SAMPLED, PipelineResult, RunSettings, run_pipeline

__all__ = ["EXACT", "SAMPLED", "PipelineResult", "Problem", "RunSettings", "load_problem", "run_pipeline"]
__version__ = "0.1.0"
