"""Off-dynamics reinforcement learning with skewed source sampling and MixUp.

Submodules: ``envs`` (noisy source/target domains), ``tabular`` (exact
finite-MDP checks of the performance bounds), ``nn`` (small MLPs and Adam),
``ratio`` (classifier log-ratio estimates), ``skew`` (priority weights and
sum-tree replay), ``mixup``, ``sac``, ``agent`` (the training loop and its
baselines) and ``harness`` (runs, ablations, CSV output).
"""

from .config import ExperimentConfig, TrainConfig
from .errors import (ConfigurationError, DadsError, DomainError, InputError,
                     OptimizerError, PreconditionError, StateError)

__version__ = "0.1.0"

__all__ = ["ExperimentConfig", "TrainConfig", "DadsError", "ConfigurationError",
           "DomainError", "InputError", "OptimizerError", "PreconditionError",
           "StateError", "__version__"]
