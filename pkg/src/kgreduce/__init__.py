"""Reducibility of the quasi-periodically driven Klein-Gordon equation on truncated sine bases."""

from .config import ModelConfig, PotentialSpec
from .estimator import KleinGordonReducer
from .exceptions import (ConfigInvalid, ConvergenceStall, DenominatorTooSmall, KGReduceError, NotSmallEnough,
                         PotentialInvalid, StepTooLarge, UnknownMetric)
from .experiment import ExperimentConfig, run

__version__ = "0.1.0"

__all__ = [
    "ConfigInvalid", "ConvergenceStall", "DenominatorTooSmall", "ExperimentConfig", "KGReduceError",
    "KleinGordonReducer", "ModelConfig", "NotSmallEnough", "PotentialInvalid", "PotentialSpec", "StepTooLarge",
    "UnknownMetric", "run",
]
