"""Recovering offered outcome distributions from selected samples by functional contraction."""

from fcselect.dist import (AtomicDistribution, DistributionError, DistributionProfile,
                           empirical_from_sample, profile_distance, thompson_distance,
                           total_variation)
from fcselect.estimate import Dataset, EstimationResult, fit_mle
from fcselect.fixpoint import FixedPointConfig, solve_fixed_point
from fcselect.selection import SelectionModel, ThetaVector

__all__ = [
    "AtomicDistribution", "DistributionError", "DistributionProfile", "empirical_from_sample",
    "profile_distance", "thompson_distance", "total_variation", "Dataset", "EstimationResult",
    "fit_mle", "FixedPointConfig", "solve_fixed_point", "SelectionModel", "ThetaVector",
]
