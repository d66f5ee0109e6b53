"""Batch sojourn times in cyclic polling systems with batch Poisson arrivals.

Mean value analysis for exhaustive and locally-gated service, closed-form
moments for globally-gated service, pointwise LSTs of the batch sojourn time,
and a discrete-event simulator used as an independent check.
"""

from .batch import BatchSupport
from .builtins import BUILTINS, builtin_model
from .distributions import Distribution
from .model import Discipline, PollingModel, load_model, validate

__all__ = [
    "BUILTINS",
    "BatchSupport",
    "Discipline",
    "Distribution",
    "PollingModel",
    "builtin_model",
    "load_model",
    "validate",
]
__version__ = "0.1.0"
