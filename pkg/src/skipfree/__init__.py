"""Stationary analysis of birth-death processes with right jumps of size at most R."""

__version__ = "0.1.0"

from .classify import ClassificationResult, classify, series_S
from .model import ProcessModel, RateProfile, TailRule, build_model, homogeneous
from .stationary import StationaryResult, psi_stationary

__all__ = [
    "ClassificationResult",
    "ProcessModel",
    "RateProfile",
    "StationaryResult",
    "TailRule",
    "build_model",
    "classify",
    "homogeneous",
    "psi_stationary",
    "series_S",
]
