"""Geometric extremal dependence modelling for bivariate data.

Gauge functions of limit sets, additive and stochastic mixtures, a
geometric classifier for asymptotic (in)dependence, truncated-gamma
likelihood fitting of radial exceedances and tail extrapolation.
"""

from .classifier import DependenceClass, IntersectionSet, chi_bounds, classify, find_intersections
from .gauges import (Gauge, Gaussian, InvertedLogistic, Logistic, MaxMin, PointwiseMin,
                     Rectangular, boundary_profile, level_set)
from .inference import FAMILIES, Exceedances, FitResult, exceedances, fit, negloglik, pp_points
from .mixtures import AdditiveMixture, MixtureSpec, build_rescaled_mixture, numeric_supremum
from .special_math import GammaParams, NumericError, RngStream
from .stochastic import StochasticMixture, tangent_point
from .synth import Scenario, scenario_catalog
from .tail_sim import (FittedModel, RegionSpec, estimate_chi_m, estimate_eta, estimate_kappa,
                       estimate_region_prob, simulate_conditional)
from .threshold import ThresholdFunction, rolling_quantile_threshold, to_angular

__version__ = "0.1.0"

__all__ = [
    "AdditiveMixture", "DependenceClass", "Exceedances", "FAMILIES", "FitResult", "FittedModel",
    "GammaParams", "Gauge", "Gaussian", "IntersectionSet", "InvertedLogistic", "Logistic",
    "MaxMin", "MixtureSpec", "NumericError", "PointwiseMin", "Rectangular", "RegionSpec",
    "RngStream", "Scenario", "StochasticMixture", "ThresholdFunction", "boundary_profile",
    "build_rescaled_mixture", "chi_bounds", "classify", "estimate_chi_m", "estimate_eta",
    "estimate_kappa", "estimate_region_prob", "exceedances", "find_intersections", "fit",
    "level_set", "negloglik", "numeric_supremum", "pp_points", "rolling_quantile_threshold",
    "scenario_catalog", "simulate_conditional", "tangent_point", "to_angular",
]
