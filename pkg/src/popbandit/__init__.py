"""Multiarmed bandits with positive externalities."""

from .env import (ConfigurationError, EnvState, Environment, Externality,
                  HorizonError, ModelConfig, StepOutcome, arrival_probs,
                  custom, log_power, power, reset, step)
from .kernel import BACKEND, COMPILED_AVAILABLE
from .policies import PolicyDescriptor, make_policy

__all__ = [
    "BACKEND", "COMPILED_AVAILABLE", "ConfigurationError", "EnvState",
    "Environment", "Externality", "HorizonError", "ModelConfig",
    "PolicyDescriptor", "StepOutcome", "arrival_probs", "custom", "log_power",
    "make_policy", "power", "reset", "step",
]
