"""Sharp bounds on marginal and weighted treatment effects with a binary instrument."""

from .bounds import (
    ExtendedInterval,
    area_of_uncertainty,
    cao_membership,
    gini_area,
    mte_membership,
    sharp_late_bounds,
    uniform_bounds_curve,
    wte_bounds,
)
from .dist import PiecewiseConstant, PiecewiseLinear, StepDistribution, build_step_distribution
from .identification import DataRecord, IdentifiedModel, estimate_identified_model, identify

__version__ = "0.1.0"

__all__ = [
    "DataRecord",
    "ExtendedInterval",
    "IdentifiedModel",
    "PiecewiseConstant",
    "PiecewiseLinear",
    "StepDistribution",
    "area_of_uncertainty",
    "build_step_distribution",
    "cao_membership",
    "estimate_identified_model",
    "gini_area",
    "identify",
    "mte_membership",
    "sharp_late_bounds",
    "uniform_bounds_curve",
    "wte_bounds",
]
