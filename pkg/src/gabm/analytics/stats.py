"""Aggregate statistics over repeated runs and comparison with reference outcomes."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from ..rng import SplitMix64


@dataclass
class MetricStats:
    metric: str
    n: int
    mean: float | None = None
    stddev: float | None = None
    min: float | None = None
    max: float | None = None

    @property
    def empty(self) -> bool:
        return self.n == 0

    @property
    def degenerate(self) -> bool:
        return self.n == 1

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "n": self.n,
            "mean": self.mean,
            "stddev": self.stddev,
            "min": self.min,
            "max": self.max,
            "degenerate": self.degenerate,
            "empty": self.empty,
        }


def summarize_values(metric: str, values) -> MetricStats:
    """Mean, sample standard deviation (n-1), min and max; n=1 gives stddev 0."""
    values = [float(v) for v in values]
    if not values:
        return MetricStats(metric, 0)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return MetricStats(metric, len(values), statistics.fmean(values), sd, min(values), max(values))


@dataclass
class RunStatistics:
    metrics: dict[str, MetricStats] = field(default_factory=dict)

    def __getitem__(self, key) -> MetricStats:
        return self.metrics[key]

    def __contains__(self, key):
        return key in self.metrics

    def to_dict(self) -> dict:
        return {k: v.to_dict() for k, v in self.metrics.items()}


def final_values(log) -> dict[str, float]:
    """Each metric key's value at the last round it was sampled (missing samples skipped)."""
    latest: dict[str, tuple[int, float | None]] = {}
    for s in log.metrics:
        if s.key not in latest or s.round >= latest[s.key][0]:
            latest[s.key] = (s.round, None if s.missing else s.value)
    return {k: v for k, (_, v) in latest.items() if v is not None}


def aggregate(logs, declared: list[str] | None = None) -> RunStatistics:
    """Statistics of final-round values across ``logs``.

    ``declared`` metric names with no samples at all appear as empty entries
    (n=0) rather than being dropped.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("aggregate needs at least one log")
    per_key: dict[str, list[float]] = {}
    seen_metrics = set()
    for log in logs:
        for s in log.metrics:
            per_key.setdefault(s.key, [])
            seen_metrics.add(s.metric)
        for key, value in final_values(log).items():
            per_key[key].append(value)
    out = RunStatistics({k: summarize_values(k, per_key[k]) for k in sorted(per_key)})
    for name in declared or ():
        if name not in seen_metrics:
            out.metrics[name] = MetricStats(name, 0)
    return out


# --- reference data ---------------------------------------------------------


@dataclass
class ReferenceDataset:
    records: list[tuple[str, float]]
    split_seed: int = 0

    def metrics(self) -> list[str]:
        return sorted({m for m, _ in self.records})


def load_reference(path, split_seed: int = 0) -> ReferenceDataset:
    """Read ``metric,value`` lines; a ``metric,value`` header and ``#`` comments are skipped."""
    records = []
    text = Path(path).read_text(encoding="utf-8")
    for n, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if [c.strip() for c in row] == ["metric", "value"]:
            continue
        if len(row) != 2:
            raise ValueError(f"{path}:{n}: expected 'metric,value'")
        try:
            records.append((row[0].strip(), float(row[1])))
        except ValueError:
            raise ValueError(f"{path}:{n}: value {row[1]!r} is not a number") from None
    if not records:
        raise ValueError(f"{path}: no records")
    return ReferenceDataset(records, split_seed)


def reference_statistics(dataset: ReferenceDataset) -> RunStatistics:
    grouped: dict[str, list[float]] = {}
    for metric, value in dataset.records:
        grouped.setdefault(metric, []).append(value)
    return RunStatistics({m: summarize_values(m, v) for m, v in sorted(grouped.items())})


def split_reference(dataset: ReferenceDataset, fraction: float, seed: int | None = None):
    """Seeded shuffle, then the first floor(n * fraction) records calibrate and the rest validate."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n = len(dataset.records)
    n_cal = math.floor(n * fraction)
    if n_cal < 1 or n - n_cal < 1:
        raise ValueError(f"{n} records cannot give both subsets at least one record at fraction {fraction}")
    order = list(range(n))
    SplitMix64(dataset.split_seed if seed is None else seed).shuffle(order)
    cal = ReferenceDataset([dataset.records[i] for i in order[:n_cal]], dataset.split_seed)
    val = ReferenceDataset([dataset.records[i] for i in order[n_cal:]], dataset.split_seed)
    return cal, val


# --- comparison -------------------------------------------------------------


@dataclass
class MetricComparison:
    metric: str
    tolerance: float
    passed: bool
    mean: float | None = None
    reference_mean: float | None = None
    deviation: float | None = None  # mean - reference_mean
    relative_deviation: float | None = None
    z: float | None = None
    note: str = ""
    n: int = 0
    reference_n: int = 0

    @property
    def abs_deviation(self) -> float | None:
        return None if self.deviation is None else abs(self.deviation)


@dataclass
class ComparisonReport:
    rows: list[MetricComparison]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failing(self) -> list[str]:
        return [r.metric for r in self.rows if not r.passed]

    def render(self) -> str:
        def f(x):
            return "-" if x is None else f"{x:.6g}"

        lines = []
        for r in self.rows:
            status = "PASS" if r.passed else "FAIL"
            lines.append(
                f"{status} {r.metric}: n={r.n} mean={f(r.mean)} reference={f(r.reference_mean)} (n={r.reference_n}) "
                f"abs_dev={f(r.abs_deviation)} rel_dev={f(r.relative_deviation)} z={f(r.z)} "
                f"tol={f(r.tolerance)}" + (f" ({r.note})" if r.note else "")
            )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def compare(stats: RunStatistics, reference: RunStatistics, tolerances: dict[str, float] | float = 0.5,
            default_tolerance: float = 0.5) -> ComparisonReport:
    """Check each reference metric's mean against the achieved mean, within an absolute tolerance."""
    if not isinstance(tolerances, dict):
        default_tolerance, tolerances = float(tolerances), {}
    rows = []
    for name, ref in reference.metrics.items():
        tol = tolerances.get(name, default_tolerance)
        got = stats.metrics.get(name)
        if got is None:
            rows.append(MetricComparison(name, tol, False, reference_mean=ref.mean, note="missing metric",
                                         reference_n=ref.n))
            continue
        if got.empty or ref.empty:
            rows.append(MetricComparison(name, tol, False, got.mean, ref.mean, note="empty metric",
                                         n=got.n, reference_n=ref.n))
            continue
        dev = got.mean - ref.mean
        rel = abs(dev) / abs(ref.mean) if ref.mean != 0 else None
        z = None
        if got.n > 1 and ref.n > 1:
            se = math.sqrt(got.stddev**2 / got.n + ref.stddev**2 / ref.n)
            if se > 0:
                z = dev / se
        rows.append(MetricComparison(name, tol, abs(dev) <= tol, got.mean, ref.mean, dev, rel, z,
                                     n=got.n, reference_n=ref.n))
    return ComparisonReport(rows)
