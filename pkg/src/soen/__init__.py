"""Scaling calculators and an event-driven simulator for superconducting optoelectronic networks."""

from .errors import (
    CausalityError,
    ConfigError,
    EndOfSimulation,
    InfeasibleDegreeError,
    InfeasibleLinkError,
    OrderingError,
    PlacementError,
    SoenError,
    UndefinedMetricError,
    WhiteMatterOverflowError,
)

__version__ = "0.1.0"

__all__ = [
    "CausalityError",
    "ConfigError",
    "EndOfSimulation",
    "InfeasibleDegreeError",
    "InfeasibleLinkError",
    "OrderingError",
    "PlacementError",
    "SoenError",
    "UndefinedMetricError",
    "WhiteMatterOverflowError",
]
