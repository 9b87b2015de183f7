"""Windowed fit / distance / rank pipeline shared by the CLI and the tests."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime

import numpy as np

from . import __version__
from .distributions import ModelKind
from .divergence import DistanceReport, NoTailBinsError, distance_report
from .empirical import (
    DegenerateSampleError,
    InsufficientSamplesError,
    WindowSnapshot,
    build_empirical,
    format_timestamp,
    read_snapshots,
)
from .fitting import FitResult, fit_cdf
from .ranking import KINDS, VARIANTS, aggregate, export_series, rank_window

log = logging.getLogger(__name__)

DEFAULT_SEED = 0
STATUSES = ("ranked", "insufficient_samples", "degenerate", "not_converged", "no_tail_bins")


@dataclass
class RunConfig:
    input: str | None = None
    out: str | None = None
    window_minutes: int = 10
    bins_per_decade: int = 8
    min_samples: int = 32
    variant: str = "both"
    jobs: int | None = None
    seed: int = DEFAULT_SEED
    hist_bins: int = 64

    def __post_init__(self):
        if self.window_minutes < 1:
            raise ValueError("window_minutes must be >= 1")
        if self.bins_per_decade < 2:
            raise ValueError("bins_per_decade must be >= 2")
        if self.min_samples < 3:
            raise ValueError("min_samples must be >= 3")
        if self.variant not in ("standard", "tail", "both"):
            raise ValueError("variant must be standard, tail or both")
        if self.jobs is not None and self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def variants(self) -> tuple[str, ...]:
        return VARIANTS if self.variant == "both" else (self.variant,)

    @property
    def workers(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def echo(self) -> dict:
        """Config fields that determine the artifacts (not parallelism or location)."""
        d = asdict(self)
        d.pop("jobs")
        d.pop("out")
        return d


@dataclass
class WindowResult:
    index: int
    window_start: datetime
    n_samples: int
    status: str
    fits: dict[ModelKind, FitResult] = field(default_factory=dict)
    reports: dict[ModelKind, DistanceReport] = field(default_factory=dict)

    @property
    def ranked(self) -> bool:
        return self.status == "ranked"


def fit_seed(seed: int, window: int, kind: ModelKind) -> int:
    return int(np.random.SeedSequence([seed, window, int(kind)]).generate_state(1)[0])


def process_window(
    index: int,
    window: WindowSnapshot,
    bins_per_decade: int = 8,
    min_samples: int = 32,
    seed: int = DEFAULT_SEED,
) -> WindowResult:
    """Empirical distribution, four fits and both distances for one window."""
    base = dict(index=index, window_start=window.window_start, n_samples=len(window))
    try:
        emp = build_empirical(window.samples, bins_per_decade, min_samples)
    except InsufficientSamplesError:
        return WindowResult(status="insufficient_samples", **base)
    except DegenerateSampleError:
        return WindowResult(status="degenerate", **base)
    fits = {kind: fit_cdf(kind, emp, seed=fit_seed(seed, index, kind)) for kind in KINDS}
    if not all(f.converged for f in fits.values()):
        return WindowResult(status="not_converged", fits=fits, **base)
    try:
        reports = {
            kind: distance_report(kind, fit.params, emp, window.window_start) for kind, fit in fits.items()
        }
    except NoTailBinsError:
        return WindowResult(status="no_tail_bins", fits=fits, **base)
    return WindowResult(status="ranked", fits=fits, reports=reports, **base)


def _task(args):
    return process_window(*args)


def process_windows(windows: list[WindowSnapshot], config: RunConfig) -> list[WindowResult]:
    tasks = [(i, w, config.bins_per_decade, config.min_samples, config.seed) for i, w in enumerate(windows)]
    workers = min(config.workers, max(1, len(tasks)))
    if workers <= 1:
        results = [_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=chunk))
    return sorted(results, key=lambda r: (r.window_start, r.index))


@dataclass
class RunSummary:
    windows_total: int
    windows_ranked: int
    excluded: dict[str, int]
    matrices: dict[str, np.ndarray]
    records: int = 0
    dropped_records: int = 0

    def rank1(self, variant: str) -> dict[str, float]:
        m = self.matrices.get(variant)
        if m is None:
            return {}
        return {k.label: float(m[int(k), 0]) for k in KINDS}

    def to_json(self, config: RunConfig) -> dict:
        return {
            "tool": "volmodel",
            "version": __version__,
            "config": config.echo(),
            "records": self.records,
            "dropped_records": self.dropped_records,
            "windows_total": self.windows_total,
            "windows_ranked": self.windows_ranked,
            "excluded": self.excluded,
            "variants": list(config.variants),
            "rank_matrix": {
                v: {k.label: [float(x) for x in m[int(k)]] for k in KINDS} for v, m in self.matrices.items()
            },
            "rank1_percent": {v: self.rank1(v) for v in self.matrices},
        }


def summarize(results: list[WindowResult], variants=VARIANTS) -> RunSummary:
    excluded = {s: 0 for s in STATUSES[1:]}
    for r in results:
        if not r.ranked:
            excluded[r.status] += 1
    ranked = [r for r in results if r.ranked]
    matrices = {}
    if ranked:
        for v in variants:
            matrices[v] = aggregate(rank_window(list(r.reports.values()), v) for r in ranked)
    return RunSummary(len(results), len(ranked), excluded, matrices)


def run_fit(config: RunConfig) -> tuple[RunSummary, list[WindowResult]]:
    """Load, process, export; returns the summary and per-window results."""
    ingest = read_snapshots(config.input, config.window_minutes)
    results = process_windows(ingest.windows, config)
    summary = summarize(results, config.variants)
    summary.records = ingest.records
    summary.dropped_records = ingest.dropped
    if config.out:
        export_series(results, config.out, config.hist_bins, config.variants)
        with open(os.path.join(config.out, "summary.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary.to_json(config), fh, indent=2, sort_keys=True)
            fh.write("\n")
    for r in results:
        if r.status != "ranked":
            log.info("window %s excluded: %s", format_timestamp(r.window_start), r.status)
    return summary, results
