"""Critical branching processes in random environment, stable-walk edition.

A simulation library plus CLI harness: strictly stable increment laws,
mean-parametrized offspring families, renewal-function tables for the
associated walk, h-transform weighted sampling, and ratio-stabilization
verification of the small-value survival asymptotics.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig
from .estimators import PhiSpec
from .offspring import EnvironmentModel, OffspringLaw
from .stable import StableParams

__all__ = [
    "ExperimentConfig",
    "PhiSpec",
    "EnvironmentModel",
    "OffspringLaw",
    "StableParams",
    "__version__",
]
