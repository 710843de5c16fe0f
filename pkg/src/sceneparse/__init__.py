"""Nonparametric scene parsing.

Pixels of a query image are labelled by retrieving training images through
greedy unique super-pixel matching, voting each super-pixel's label from an
adaptively sized neighbourhood, and smoothing the result with a
co-occurrence MRF solved by alpha-beta swap graph cuts.
"""
from sceneparse.errors import (
    BundleError,
    DegenerateRetrievalError,
    InvalidInputError,
    NoNeighborsError,
    UndefinedMetricError,
)
from sceneparse.kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BundleError",
    "DegenerateRetrievalError",
    "InvalidInputError",
    "NoNeighborsError",
    "UndefinedMetricError",
]
