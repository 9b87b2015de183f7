"""Per-window model ranks, aggregate rank matrices and tabular exports."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

from .distributions import ModelKind
from .divergence import DistanceReport, comparison_key
from .empirical import format_timestamp

VARIANTS = ("standard", "tail")
KINDS = tuple(ModelKind)
FLOAT_FMT = ".17g"


class MissingModelError(ValueError):
    pass


class EmptyRankingError(ValueError):
    pass


@dataclass(frozen=True)
class RankedModel:
    kind: ModelKind
    rank: int
    distance: float


@dataclass
class RankingTable:
    windows: list[tuple[datetime | None, list[RankedModel]]] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)))


def report_distance(report: DistanceReport, variant: str) -> float:
    if variant == "standard":
        return report.d_standard
    if variant == "tail":
        return report.d_tail
    raise ValueError(f"variant must be 'standard' or 'tail', got {variant!r}")


def rank_window(reports: Sequence[DistanceReport], variant: str = "standard") -> list[RankedModel]:
    """Rank the four models of one window by ``|distance|``, best first.

    Ties keep the declaration order of :class:`ModelKind`.
    """
    by_kind = {}
    for r in reports:
        if r.kind in by_kind:
            raise MissingModelError(f"duplicate report for {r.kind.label}")
        by_kind[r.kind] = r
    missing = [k.label for k in KINDS if k not in by_kind]
    if missing:
        raise MissingModelError(f"no report for {', '.join(missing)}")
    values = {k: report_distance(by_kind[k], variant) for k in KINDS}
    order = sorted(KINDS, key=lambda k: (comparison_key(values[k]), int(k)))
    return [RankedModel(k, i + 1, values[k]) for i, k in enumerate(order)]


def rank_distances(distances: Sequence[float]) -> list[int]:
    """Ranks of four distances given in :class:`ModelKind` order."""
    if len(distances) != len(KINDS):
        raise MissingModelError("need one distance per model")
    order = sorted(range(len(KINDS)), key=lambda i: (comparison_key(distances[i]), i))
    ranks = [0] * len(KINDS)
    for pos, i in enumerate(order):
        ranks[i] = pos + 1
    return ranks


def aggregate(rankings: Iterable[Sequence[RankedModel]]) -> np.ndarray:
    """Percentage of windows in which each model (row) holds each rank (column)."""
    counts = np.zeros((len(KINDS), len(KINDS)))
    n = 0
    for ranked in rankings:
        for entry in ranked:
            counts[int(entry.kind), entry.rank - 1] += 1
        n += 1
    if n == 0:
        raise EmptyRankingError("no ranked window to aggregate")
    return counts * (100.0 / n)


def ranking_table(windows: Iterable[tuple[datetime | None, Sequence[DistanceReport]]], variant: str) -> RankingTable:
    table = RankingTable()
    for start, reports in windows:
        table.windows.append((start, rank_window(reports, variant)))
    table.matrix = aggregate(r for _, r in table.windows)
    return table


def histogram(values, bins: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Counts and edges over the finite values; empty input gives no bins."""
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=np.float64)
    if len(v) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    counts, edges = np.histogram(v, bins=bins)
    return counts, edges


def fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_series(results, out_dir, hist_bins: int = 64, variants: Sequence[str] = VARIANTS) -> list[str]:
    """Write parameter, error, distance and rank tables for a run.

    ``results`` is a sequence of window results (see ``volmodel.pipeline``)
    sorted by window start. Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    for kind in KINDS:
        param_rows, error_rows = [], []
        for res in results:
            fit = res.fits.get(kind) if res.fits else None
            if fit is None:
                continue
            ts = format_timestamp(res.window_start)
            param_rows.append(
                (ts, fmt(fit.params.phi), fmt(fit.params.theta), fmt(fit.sse), fit.n_eval, int(fit.converged))
            )
            error_rows.append((ts, fmt(fit.rel_err_phi), fmt(fit.rel_err_theta)))
        _write_csv(path(f"params_{kind.slug}.csv"), ("window_start", "phi", "theta", "sse", "n_eval", "converged"), param_rows)
        _write_csv(path(f"errors_{kind.slug}.csv"), ("window_start", "rel_err_phi", "rel_err_theta"), error_rows)

    ranked = [res for res in results if res.ranked]
    labels = [k.label for k in KINDS]
    for variant in variants:
        dist_rows, rank_rows = [], []
        for res in ranked:
            ts = format_timestamp(res.window_start)
            values = [report_distance(res.reports[k], variant) for k in KINDS]
            ranks = rank_distances(values)
            dist_rows.append((ts, *(fmt(v) for v in values)))
            rank_rows.append((ts, *ranks, KINDS[ranks.index(1)].label))
        _write_csv(path(f"dist_{variant}.csv"), ("window_start", *labels), dist_rows)
        _write_csv(path(f"ranks_{variant}.csv"), ("window_start", *labels, "best"), rank_rows)

    hist_rows = []
    for kind in KINDS:
        fits = [res.fits[kind] for res in results if res.fits and res.fits.get(kind) and res.fits[kind].converged]
        for quantity, values in (
            ("rel_err_phi", [f.rel_err_phi for f in fits]),
            ("rel_err_theta", [f.rel_err_theta for f in fits]),
        ):
            counts, edges = histogram(values, hist_bins)
            hist_rows.extend(
                (kind.label, quantity, fmt(edges[i]), fmt(edges[i + 1]), int(c)) for i, c in enumerate(counts)
            )
    _write_csv(path("hist_errors.csv"), ("model", "quantity", "bin_left", "bin_right", "count"), hist_rows)

    hist_rows = []
    for kind in KINDS:
        for variant, values in (
            ("standard", [res.reports[kind].d_standard for res in ranked]),
            ("tail_abs", [abs(res.reports[kind].d_tail) for res in ranked]),
        ):
            counts, edges = histogram(values, hist_bins)
            hist_rows.extend(
                (kind.label, variant, fmt(edges[i]), fmt(edges[i + 1]), int(c)) for i, c in enumerate(counts)
            )
    _write_csv(path("hist_distances.csv"), ("model", "variant", "bin_left", "bin_right", "count"), hist_rows)
    return written


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty table")
    return rows[0], rows[1:]


def matrix_from_ranks(rows: Sequence[Sequence[str]]) -> np.ndarray:
    """Rank matrix from ``ranks_<variant>.csv`` rows."""
    rankings = [
        [RankedModel(kind, int(row[1 + int(kind)]), math.nan) for kind in KINDS]
        for row in rows
    ]
    return aggregate(rankings)
