"""Penalized-spline GAM fitting with raw-data-free pointwise meta-analysis.

The heavy lifting lives in the C++ extension; this package re-exports the
main operations: fit a per-cohort model, strip it down to aggregates, pool
term estimates across cohorts, and combine per-cohort p-values.
"""

from ._core import (
    FittedGam,
    MetagamError,
    RankDeficientDesignError,
    SchemaViolationError,
    StrippedModel,
    VersionMismatchError,
    combine_pvalues,
    fit_gam,
    place_knots,
    pool,
    strip_rawdata,
)

__all__ = [
    "FittedGam",
    "MetagamError",
    "RankDeficientDesignError",
    "SchemaViolationError",
    "StrippedModel",
    "VersionMismatchError",
    "combine_pvalues",
    "fit_gam",
    "place_knots",
    "pool",
    "strip_rawdata",
]

__version__ = "0.1.0"
