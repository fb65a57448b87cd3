"""Simulation and verification harness for the 3-D stochastic wave equation with
Riesz-correlated noise: Girsanov coupling, transport-cost and concentration checks."""

from cwt2.config import ExperimentConfig
from cwt2.errors import BlowUpError, ConfigError, DomainError, NumericalError, ShapeError
from cwt2.spectral_noise import PeriodicGrid, SpatialCovariance

__all__ = [
    "BlowUpError",
    "ConfigError",
    "DomainError",
    "ExperimentConfig",
    "NumericalError",
    "PeriodicGrid",
    "ShapeError",
    "SpatialCovariance",
]
