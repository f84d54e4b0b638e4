"""Repeated seeded runs of one scenario and export of their metric samples."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

from ..engine import EpisodeAborted, EpisodeLog, run_episode
from ..llm import Backend
from ..scenario import ScenarioConfig

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ("metric", "run", "round", "subject", "target", "value", "missing")


@dataclass
class RunOutcome:
    index: int
    seed: int
    log: EpisodeLog | None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.log is not None and self.log.status == "complete"


def run_many(config: ScenarioConfig | Callable[[int], ScenarioConfig], backend_factory: Callable[[], Backend],
             n_runs: int, base_seed: int = 0, workers: int = 1) -> list[RunOutcome]:
    """Run ``n_runs`` episodes with seeds ``base_seed + i``, returned in run order.

    ``config`` may be a callable mapping a seed to a config, so that agent
    characteristics drawn at parse time follow each run's seed. A failed run is
    kept as an outcome carrying the error (and its partial log, if any).
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")

    def one(i: int) -> RunOutcome:
        seed = base_seed + i
        cfg = config(seed) if callable(config) else replace(config, seed=seed)
        try:
            return RunOutcome(i, seed, run_episode(cfg, backend_factory()))
        except EpisodeAborted as exc:
            logger.error("run %d (seed %d) failed: %s", i, seed, exc)
            return RunOutcome(i, seed, None, f"{type(exc.cause).__name__}: {exc.cause}")

    if workers <= 1:
        return [one(i) for i in range(n_runs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(one, range(n_runs)))
    return sorted(outcomes, key=lambda o: o.index)


def write_metrics_csv(fh, logs: list[tuple[int, EpisodeLog]]) -> int:
    """Write ``(run index, log)`` samples as CSV (RFC 4180 quoting); returns the row count."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    rows = 0
    for run, log in logs:
        for s in log.metrics:
            value = "" if s.missing or s.value is None else repr(float(s.value))
            writer.writerow((s.metric, run, s.round, s.subject, s.target, value, "true" if s.missing else "false"))
            rows += 1
    return rows
