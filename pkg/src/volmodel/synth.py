"""Seeded synthetic volume-price windows with known generating models.

Random streams: window ``w`` of a run seeded with ``seed`` draws from
``Generator(Philox(SeedSequence([seed, w])))``. Philox is counter based,
so each window's stream is independent of how many windows are generated
or in what order.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from . import distributions as dist
from .distributions import ModelKind, ModelParams
from .empirical import (
    EmpiricalDistribution,
    WindowSnapshot,
    format_timestamp,
    log_bin_edges,
    parse_timestamp,
    write_snapshots,
)

DEFAULT_START = datetime(2011, 1, 27, 14, 30, tzinfo=timezone.utc)
MIN_SAMPLES = 32
_TWO53 = float(2**53)


class SynthSpecError(ValueError):
    pass


@dataclass
class SynthSpec:
    kind: ModelKind | None = None
    params: ModelParams | None = None
    windows: int = 1
    samples_per_window: int = 2000
    seed: int = 0
    schedule: list[tuple[ModelKind, ModelParams]] | None = None
    start: datetime = DEFAULT_START
    window_minutes: int = 10

    def __post_init__(self):
        if self.windows < 1:
            raise SynthSpecError("windows must be >= 1")
        if self.samples_per_window < MIN_SAMPLES:
            raise SynthSpecError(f"samples_per_window must be >= {MIN_SAMPLES}")
        if self.window_minutes < 1:
            raise SynthSpecError("window_minutes must be >= 1")
        if self.schedule is not None:
            if len(self.schedule) != self.windows:
                raise SynthSpecError(
                    f"schedule has {len(self.schedule)} entries for {self.windows} windows"
                )
        elif self.kind is None or self.params is None:
            raise SynthSpecError("either kind and params or a schedule is required")
        for kind, params in self.entries():
            dist.check_params(kind, params)

    def entries(self) -> list[tuple[ModelKind, ModelParams]]:
        if self.schedule is not None:
            return [(ModelKind(k), p) for k, p in self.schedule]
        return [(ModelKind(self.kind), self.params)] * self.windows

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        def entry(d):
            params = d.get("params", d)
            return ModelKind.parse(d["kind"]), ModelParams(float(params["phi"]), float(params["theta"]))

        schedule = None
        kind = params = None
        if "schedule" in data:
            schedule = [entry(d) for d in data["schedule"]]
        else:
            kind, params = entry(data)
        windows = int(data.get("windows", len(schedule) if schedule else 1))
        start = parse_timestamp(data["start"]) if "start" in data else DEFAULT_START
        return cls(
            kind=kind,
            params=params,
            windows=windows,
            samples_per_window=int(data.get("samples_per_window", 2000)),
            seed=int(data.get("seed", 0)),
            schedule=schedule,
            start=start,
            window_minutes=int(data.get("window_minutes", 10)),
        )


@dataclass
class SynthRun:
    windows: list[WindowSnapshot]
    manifest: dict = field(default_factory=dict)


def substream(seed, index: int = 0) -> np.random.Generator:
    """Independent Philox stream ``index`` of run ``seed``."""
    entropy = [int(x) for x in np.atleast_1d(seed)] + [int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform variates on the open interval (0, 1) with 53-bit resolution."""
    return (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) / _TWO53


def sample(kind: ModelKind, params: ModelParams, n: int, seed=0, rng: np.random.Generator | None = None) -> np.ndarray:
    """``n`` draws by inverse-transform sampling.

    LogNormal exponentiates a Gaussian draw, Weibull uses the closed-form
    inverse and Gamma / InverseGamma invert the cdf by bisection.
    """
    kind = ModelKind(kind)
    dist.check_params(kind, params)
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = substream(seed)
    if kind == ModelKind.LOGNORMAL:
        return np.exp(params.phi + params.theta * rng.standard_normal(n))
    return np.asarray(dist.quantile(kind, params, open_uniforms(rng, n)), dtype=np.float64)


def generate(spec: SynthSpec) -> SynthRun:
    """One window per schedule entry plus a manifest of the generating models."""
    windows = []
    records = []
    for w, (kind, params) in enumerate(spec.entries()):
        start = spec.start + timedelta(minutes=w * spec.window_minutes)
        values = sample(kind, params, spec.samples_per_window, rng=substream(spec.seed, w))
        windows.append(WindowSnapshot(window_start=start, samples=values))
        records.append(
            {
                "window": w,
                "window_start": format_timestamp(start),
                "kind": kind.label,
                "phi": params.phi,
                "theta": params.theta,
                "samples": spec.samples_per_window,
            }
        )
    manifest = {
        "seed": spec.seed,
        "window_minutes": spec.window_minutes,
        "samples_per_window": spec.samples_per_window,
        "rng": "numpy Philox, SeedSequence([seed, window])",
        "windows": records,
    }
    return SynthRun(windows, manifest)


def _snapshot_rows(run: SynthRun, seed: int):
    # Volumes are powers of two so price * volume reproduces s exactly.
    width = max(4, len(str(max(len(w) for w in run.windows))))
    for w, window in enumerate(run.windows):
        rng = substream([seed, 1], w)
        exponents = rng.integers(0, 11, size=len(window))
        for i, (s, e) in enumerate(zip(window.samples.tolist(), exponents.tolist())):
            volume = 1 << e
            yield window.window_start, f"S{i + 1:0{width}d}", repr(s / volume), volume


def write_run(run: SynthRun, out_dir, seed: int = 0, filename: str = "snapshots.csv") -> tuple[str, str]:
    """Write the snapshot CSV and ``manifest.json`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, filename)
    write_snapshots(csv_path, _snapshot_rows(run, seed))
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(run.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, manifest_path


def exact_empirical(
    kind: ModelKind,
    params: ModelParams,
    points: int = 200,
    bins_per_decade: int = 8,
    lo_q: float = 1e-4,
    hi_q: float = 1.0 - 1e-4,
) -> EmpiricalDistribution:
    """Noise-free empirical distribution of a model.

    The ECDF is the analytic cdf on ``points`` geometric points between the
    ``lo_q`` and ``hi_q`` quantiles; bin densities are the model density at
    the geometric bin midpoints and the median is the model median.
    """
    kind = ModelKind(kind)
    lo = float(dist.quantile(kind, params, lo_q))
    hi = float(dist.quantile(kind, params, hi_q))
    s = np.geomspace(lo, hi, points)
    edges = log_bin_edges(lo, hi, bins_per_decade)
    mids = np.sqrt(edges[:-1] * edges[1:])
    return EmpiricalDistribution.from_densities(
        s, dist.cdf(kind, params, s), edges, dist.pdf(kind, params, mids), dist.median(kind, params)
    )


def load_spec(path) -> SynthSpec:
    with open(path, encoding="utf-8") as fh:
        return SynthSpec.from_dict(json.load(fh))


def schedule_alternating(
    first: tuple[ModelKind, ModelParams], second: tuple[ModelKind, ModelParams], windows: int
) -> list[tuple[ModelKind, ModelParams]]:
    return [first if w % 2 == 0 else second for w in range(windows)]

