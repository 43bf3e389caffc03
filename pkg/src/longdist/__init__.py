"""Longitudinal distances over per-epoch prediction traces, for instance attribution."""

from .distance import (
    DistanceKind,
    DistanceVector,
    ExplainerResult,
    Polarity,
    d_longitudinal,
    d_negative,
    d_strict,
    distance_matrix,
    distances_to_all,
    explainer_set,
    explainer_union,
)
from .traces import TraceMatrix, build_trace, correctness_mask, read_trace, write_trace

__version__ = "0.1.0"
