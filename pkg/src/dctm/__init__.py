"""Bayesian transformation models for count and ordinal responses."""

__version__ = "0.1.0"

from .refdist import ReferenceDistribution
from .model import ModelSpec, TermSpec, build_design

__all__ = ["ReferenceDistribution", "ModelSpec", "TermSpec", "build_design"]
