"""Config-driven experiment runner and its command-line interface."""

from .config import ExperimentConfig, Violation, load_config, parse_config, validate
from .experiment import GhostImagingExperiment, RunOutput, build_plan, evaluate_oracle, run

__all__ = [
    "ExperimentConfig",
    "GhostImagingExperiment",
    "RunOutput",
    "Violation",
    "build_plan",
    "evaluate_oracle",
    "load_config",
    "parse_config",
    "run",
    "validate",
]
