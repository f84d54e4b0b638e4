"""Metrics, multi-run statistics and comparison against reference data."""

from .metrics import MetricSample, MetricSpec, parse_opinion, sample_opinion
from .stats import (
    ComparisonReport,
    MetricStats,
    ReferenceDataset,
    RunStatistics,
    aggregate,
    compare,
    load_reference,
    reference_statistics,
    split_reference,
    summarize_values,
)

__all__ = [
    "ComparisonReport",
    "MetricSample",
    "MetricSpec",
    "MetricStats",
    "ReferenceDataset",
    "RunStatistics",
    "aggregate",
    "compare",
    "load_reference",
    "parse_opinion",
    "reference_statistics",
    "sample_opinion",
    "split_reference",
    "summarize_values",
]
