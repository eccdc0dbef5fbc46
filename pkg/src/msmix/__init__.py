"""Multiscale Bayesian nonparametric mixtures for partial hierarchical clustering."""

from .generative import Dataset, GroundTruth, Params, simulate_dataset
from .prior_model import HyperParams

__version__ = "0.1.0"

__all__ = ["Dataset", "GroundTruth", "HyperParams", "Params", "simulate_dataset"]
