"""Generalized Kullback-Leibler distance between a fitted model and a histogram.

``D(F) = sum_i ln|P_i / Q_i| F_i dx_i`` over non-empty bins, where ``P`` is
the model density at each bin's geometric midpoint, ``Q`` the empirical
density and ``F`` a weight. ``F = P`` gives the standard distance over the
whole histogram; ``F = 1/P`` restricted to bins above the sample median
gives the tail distance. The value can be negative, so models are compared
by its absolute value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from . import distributions as dist
from .distributions import ModelKind, ModelParams
from .empirical import EmpiricalDistribution

P_FLOOR = 1e-300


class DivergenceError(ValueError):
    pass


class NoTailBinsError(DivergenceError):
    """No non-empty histogram bin lies above the median."""


@dataclass(frozen=True)
class DistanceReport:
    window_start: datetime | None
    kind: ModelKind
    d_standard: float
    d_tail: float
    bins_used_standard: int
    bins_used_tail: int


def _kl_terms(model_density, empirical, widths, weight):
    p = np.asarray(model_density, dtype=np.float64)
    q = np.asarray(empirical, dtype=np.float64)
    w = np.asarray(widths, dtype=np.float64)
    f = np.asarray(weight, dtype=np.float64)
    if not (p.shape == q.shape == w.shape == f.shape) or p.ndim != 1:
        raise DivergenceError("model, empirical, width and weight sequences must share one bin set")
    if np.any(w <= 0.0):
        raise DivergenceError("bin widths must be positive")
    keep = q > 0.0
    if not np.any(keep):
        raise DivergenceError("every bin is empty")
    p = np.maximum(p[keep], P_FLOOR)
    return float(np.sum(np.log(np.abs(p / q[keep])) * f[keep] * w[keep])), int(keep.sum())


def generalized_kl(model_density, empirical, widths, weight) -> float:
    """``sum_i ln|P_i/Q_i| F_i dx_i`` over bins with ``Q_i > 0``.

    ``P`` is floored at 1e-300 before the ratio.
    """
    return _kl_terms(model_density, empirical, widths, weight)[0]


def _model_density(kind: ModelKind, params: ModelParams, emp: EmpiricalDistribution) -> np.ndarray:
    return np.maximum(dist.pdf(kind, params, emp.midpoints), P_FLOOR)


def _standard(kind, params, emp):
    p = _model_density(kind, params, emp)
    return _kl_terms(p, emp.density, emp.widths, p)


def _tail(kind, params, emp):
    keep = (emp.edges[:-1] >= emp.median) & (emp.density > 0.0)
    if not np.any(keep):
        raise NoTailBinsError("no non-empty histogram bin lies above the median")
    widths = emp.widths[keep]
    q = emp.density[keep]
    q = q / np.sum(q * widths)
    p = np.maximum(dist.pdf(kind, params, emp.midpoints[keep]), P_FLOOR)
    p = np.maximum(p / np.sum(p * widths), P_FLOOR)
    return _kl_terms(p, q, widths, 1.0 / p)


def standard_distance(kind: ModelKind, params: ModelParams, emp: EmpiricalDistribution) -> float:
    """Distance with weight ``F = P`` over all non-empty bins."""
    return _standard(ModelKind(kind), params, emp)[0]


def tail_distance(kind: ModelKind, params: ModelParams, emp: EmpiricalDistribution) -> float:
    """Distance with weight ``F = 1/P`` over the bins whose left edge is at or above the median.

    Both densities are conditioned on the retained bins: ``Q`` and ``P``
    are each rescaled so that ``sum density * width = 1`` there.
    """
    return _tail(ModelKind(kind), params, emp)[0]


def distance_report(
    kind: ModelKind,
    params: ModelParams,
    emp: EmpiricalDistribution,
    window_start: datetime | None = None,
) -> DistanceReport:
    kind = ModelKind(kind)
    d_std, n_std = _standard(kind, params, emp)
    d_tail, n_tail = _tail(kind, params, emp)
    return DistanceReport(window_start, kind, d_std, d_tail, n_std, n_tail)


def comparison_key(value: float) -> float:
    """Ranking key: the magnitude of a distance."""
    return math.fabs(value)
