"""Semiparametric Bayesian inference for a mean response with missing-at-random outcomes."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
