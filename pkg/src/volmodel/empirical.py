"""Snapshot ingestion and per-window empirical distributions.

Input is a CSV with header ``timestamp,ticker,price,volume`` (optionally
gzip-compressed). Each record yields one volume-price ``s = price * volume``;
records are grouped into fixed windows by ``floor(epoch_minutes / window)``.
"""
from __future__ import annotations

import csv
import gzip
import io
import logging
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

HEADER = ("timestamp", "ticker", "price", "volume")
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class SnapshotParseError(ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class EmptyInputError(ValueError):
    """No valid record in the input."""


class InsufficientSamplesError(ValueError):
    pass


class DegenerateSampleError(ValueError):
    """All samples are equal, so no spread to fit."""


@dataclass(frozen=True)
class SnapshotRecord:
    timestamp: datetime
    ticker: str
    price: float
    volume: int


@dataclass
class WindowSnapshot:
    window_start: datetime
    samples: np.ndarray

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class Ingest:
    windows: list[WindowSnapshot]
    records: int = 0
    dropped: int = 0
    duplicates: int = 0


@dataclass
class EmpiricalDistribution:
    """ECDF plus log-binned histogram of one window.

    ``ecdf_f[k]`` is the fraction of samples ``<= ecdf_s[k]``. Histogram bin
    ``i`` spans ``edges[i]..edges[i+1]`` with density
    ``counts[i] / (n * widths[i])``.
    """

    ecdf_s: np.ndarray
    ecdf_f: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    n: int
    median: float
    widths: np.ndarray = field(init=False)
    density: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ecdf_s = np.asarray(self.ecdf_s, dtype=np.float64)
        self.ecdf_f = np.asarray(self.ecdf_f, dtype=np.float64)
        self.edges = np.asarray(self.edges, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.float64)
        self.widths = np.diff(self.edges)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.density = self.counts / (self.n * self.widths)

    @classmethod
    def from_densities(cls, ecdf_s, ecdf_f, edges, density, median: float) -> "EmpiricalDistribution":
        """Build from given bin densities rather than counts (model-exact histograms)."""
        edges = np.asarray(edges, dtype=np.float64)
        emp = cls(ecdf_s, ecdf_f, edges, np.zeros(len(edges) - 1), n=1, median=median)
        emp.density = np.asarray(density, dtype=np.float64)
        emp.counts = emp.density * emp.widths
        return emp

    @property
    def ecdf_points(self) -> list[tuple[float, float]]:
        return list(zip(self.ecdf_s.tolist(), self.ecdf_f.tolist()))

    @property
    def bins(self) -> list[tuple[float, float, float, float]]:
        """``(left, right, density, width)`` per bin."""
        return [
            (float(a), float(b), float(q), float(w))
            for a, b, q, w in zip(self.edges[:-1], self.edges[1:], self.density, self.widths)
        ]

    @property
    def midpoints(self) -> np.ndarray:
        """Geometric bin midpoints."""
        return np.sqrt(self.edges[:-1] * self.edges[1:])

    def validate(self) -> None:
        s, f = self.ecdf_s, self.ecdf_f
        if s.ndim != 1 or s.shape != f.shape or len(s) < 3:
            raise ValueError("ECDF needs at least 3 matching (s, F) points")
        if not np.all(s > 0.0) or not np.all(np.isfinite(s)):
            raise ValueError("ECDF evaluation points must be finite and > 0")
        if np.any(np.diff(s) < 0.0):
            raise ValueError("ECDF evaluation points must be sorted")
        if not np.all((f >= 0.0) & (f <= 1.0)):
            raise ValueError("ECDF values must lie in [0, 1]")
        if np.any(np.diff(self.edges) <= 0.0):
            raise ValueError("histogram edges must be strictly increasing")


def volume_price(price: float, volume: float) -> float:
    """Volume-price ``s = p V`` of one record."""
    if not price > 0.0:
        raise ValueError(f"price must be > 0, got {price!r}")
    if not volume >= 0:
        raise ValueError(f"volume must be >= 0, got {volume!r}")
    return price * volume


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _open_text(source) -> io.TextIOBase:
    if hasattr(source, "read"):
        return source
    path = os.fspath(source)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def read_snapshots(source, window_minutes: int = 10) -> Ingest:
    """Parse a snapshot CSV and group volume-prices into windows.

    Zero-volume and non-positive-price records are dropped and counted. When
    a ticker appears more than once in a window its latest record wins.
    """
    if window_minutes < 1:
        raise ValueError("window_minutes must be >= 1")
    name = getattr(source, "name", source)
    ts_cache: dict[str, int] = {}
    groups: dict[int, dict[str, tuple[int, float]]] = {}
    records = dropped = duplicates = 0
    with _open_text(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise SnapshotParseError(name, 1, f"expected header {','.join(HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise SnapshotParseError(name, line, f"expected 4 fields, got {len(row)}")
            stamp, ticker, price_txt, volume_txt = row
            minute = ts_cache.get(stamp)
            if minute is None:
                try:
                    ts = parse_timestamp(stamp)
                except ValueError:
                    raise SnapshotParseError(name, line, f"bad timestamp {stamp!r}") from None
                minute = (ts - EPOCH) // timedelta(minutes=1)
                ts_cache[stamp] = minute
            try:
                price = float(price_txt)
                volume = int(volume_txt)
            except ValueError:
                raise SnapshotParseError(name, line, "price must be decimal and volume integer") from None
            if not math.isfinite(price):
                raise SnapshotParseError(name, line, f"non-finite price {price_txt!r}")
            ticker = ticker.strip()
            if not ticker:
                raise SnapshotParseError(name, line, "empty ticker")
            records += 1
            if price <= 0.0 or volume <= 0:
                dropped += 1
                continue
            key = minute // window_minutes
            window = groups.setdefault(key, {})
            prev = window.get(ticker)
            if prev is not None:
                duplicates += 1
                if prev[0] > minute:
                    continue
            window[ticker] = (minute, volume_price(price, volume))
    if dropped:
        log.warning("dropped %d of %d records with zero volume or non-positive price", dropped, records)
    if duplicates:
        log.warning("%d repeated ticker records within a window; kept the latest", duplicates)
    if not groups:
        raise EmptyInputError(f"{name}: no valid snapshot record")
    windows = [
        WindowSnapshot(
            window_start=EPOCH + timedelta(minutes=key * window_minutes),
            samples=np.fromiter((v for _, v in groups[key].values()), dtype=np.float64),
        )
        for key in sorted(groups)
    ]
    return Ingest(windows, records=records, dropped=dropped, duplicates=duplicates)


def load_snapshots(source, window_minutes: int = 10) -> list[WindowSnapshot]:
    """Windows of volume-price samples in chronological order."""
    return read_snapshots(source, window_minutes).windows


def write_snapshots(path, rows: Iterable[tuple[datetime, str, str, int]]) -> None:
    """Write ``(timestamp, ticker, price_text, volume)`` rows in the snapshot format."""
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for ts, ticker, price, volume in rows:
            writer.writerow((format_timestamp(ts), ticker, price, volume))


def log_bin_edges(lo: float, hi: float, bins_per_decade: int = 8) -> np.ndarray:
    """Geometric edges from ``lo`` to ``hi`` with about ``bins_per_decade`` per decade."""
    if bins_per_decade < 1:
        raise ValueError("bins_per_decade must be >= 1")
    if not 0.0 < lo < hi:
        raise ValueError("log bins need 0 < lo < hi")
    nbins = max(1, math.ceil(math.log10(hi / lo) * bins_per_decade - 1e-9))
    edges = np.geomspace(lo, hi, nbins + 1)
    edges[0], edges[-1] = lo, hi
    return edges


def build_empirical(samples, bins_per_decade: int = 8, min_samples: int = 32) -> EmpiricalDistribution:
    """ECDF, log-binned histogram and median of a window's samples."""
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = len(s)
    if n < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} samples, got {n}")
    if not np.all(s > 0.0) or not np.all(np.isfinite(s)):
        raise ValueError("samples must be finite and > 0")
    if s[0] == s[-1]:
        raise DegenerateSampleError("all samples are equal")
    values, counts = np.unique(s, return_counts=True)
    ecdf_f = np.cumsum(counts) / n
    ecdf_f[-1] = 1.0
    edges = log_bin_edges(s[0], s[-1], bins_per_decade)
    hist, _ = np.histogram(s, bins=edges)
    return EmpiricalDistribution(
        ecdf_s=values,
        ecdf_f=ecdf_f,
        edges=edges,
        counts=hist,
        n=n,
        median=float(np.median(s)),
    )
