"""Simulator for Byzantine-resilient decentralized multi-armed bandits."""
from __future__ import annotations

__version__ = "0.1.0"

from .core import ArmEnvironment, Bernoulli, ConfigError, InvariantViolation, PointMass
from .engine import ExperimentConfig, KappaUniform, run_batch, simulate

__all__ = [
    "ArmEnvironment",
    "Bernoulli",
    "ConfigError",
    "ExperimentConfig",
    "InvariantViolation",
    "KappaUniform",
    "PointMass",
    "__version__",
    "run_batch",
    "simulate",
]
