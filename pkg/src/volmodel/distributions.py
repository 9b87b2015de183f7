"""The four candidate volume-price models and the special functions behind them.

All four are two-parameter families on ``s > 0``:

=============  ==================================================  ====================
kind           density                                             parameters
=============  ==================================================  ====================
Gamma          s^(phi-1) exp(-s/theta) / (theta^phi Gamma(phi))     phi > 0, theta > 0
InverseGamma   theta^phi s^(-phi-1) exp(-theta/s) / Gamma(phi)      phi > 0, theta > 0
LogNormal      exp(-(log s - phi)^2 / (2 theta^2)) / (sqrt(2pi) theta s)   theta > 0
Weibull        (phi/theta^phi) s^(phi-1) exp(-(s/theta)^phi)        phi > 0, theta > 0
=============  ==================================================  ====================

Densities are evaluated in log space and exponentiated last.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels


class DomainError(ValueError):
    """Argument outside the support or parameter space of a model."""


class ModelKind(enum.IntEnum):
    """Candidate model identity; declaration order is the tie-break order."""

    GAMMA = 0
    INVERSE_GAMMA = 1
    LOGNORMAL = 2
    WEIBULL = 3

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def slug(self) -> str:
        return _SLUGS[self]

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        key = text.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        for kind in cls:
            if key in (kind.label.lower(), kind.slug.replace("_", ""), kind.name.lower().replace("_", "")):
                return kind
        raise ValueError(f"unknown model kind {text!r}")


_LABELS = {
    ModelKind.GAMMA: "Gamma",
    ModelKind.INVERSE_GAMMA: "InverseGamma",
    ModelKind.LOGNORMAL: "LogNormal",
    ModelKind.WEIBULL: "Weibull",
}
_SLUGS = {
    ModelKind.GAMMA: "gamma",
    ModelKind.INVERSE_GAMMA: "inverse_gamma",
    ModelKind.LOGNORMAL: "lognormal",
    ModelKind.WEIBULL: "weibull",
}


@dataclass(frozen=True)
class ModelParams:
    """Shape-like ``phi`` and scale-like ``theta``.

    For LogNormal ``phi`` is the log-location and may be any real number.
    """

    phi: float
    theta: float


def check_params(kind: ModelKind, params: ModelParams) -> None:
    phi, theta = params.phi, params.theta
    if not (math.isfinite(phi) and math.isfinite(theta)):
        raise DomainError(f"{kind.label} parameters must be finite, got {params}")
    if theta <= 0.0:
        raise DomainError(f"{kind.label} requires theta > 0, got {theta!r}")
    if kind != ModelKind.LOGNORMAL and phi <= 0.0:
        raise DomainError(f"{kind.label} requires phi > 0, got {phi!r}")


def _support(s) -> np.ndarray:
    arr = np.asarray(s, dtype=np.float64)
    if not np.all(arr > 0.0) or not np.all(np.isfinite(arr)):
        raise DomainError("volume-price arguments must be finite and > 0")
    return arr


def _unwrap(arr: np.ndarray, like):
    return float(arr.reshape(())) if np.ndim(like) == 0 else arr


def logpdf(kind: ModelKind, params: ModelParams, s):
    """Natural log of the density at ``s`` (scalar or array)."""
    check_params(kind, params)
    arr = _support(s)
    return _unwrap(kernels.logpdf_array(int(kind), params.phi, params.theta, arr), s)


def pdf(kind: ModelKind, params: ModelParams, s):
    """Density at ``s``; finite and non-negative for valid input."""
    check_params(kind, params)
    arr = _support(s)
    return _unwrap(kernels.pdf_array(int(kind), params.phi, params.theta, arr), s)


def cdf(kind: ModelKind, params: ModelParams, s):
    """Cumulative distribution function at ``s``.

    Gamma uses the regularized lower incomplete gamma at ``s/theta``,
    InverseGamma the regularized upper one at ``theta/s``, LogNormal the
    Gaussian cdf of ``(log s - phi)/theta`` and Weibull the closed form.
    """
    check_params(kind, params)
    arr = _support(s)
    return _unwrap(kernels.cdf_array(int(kind), params.phi, params.theta, arr), s)


def sf(kind: ModelKind, params: ModelParams, s):
    """Survival function ``1 - cdf``, computed without cancellation."""
    check_params(kind, params)
    arr = _support(s)
    return _unwrap(kernels.sf_array(int(kind), params.phi, params.theta, arr), s)


def quantile(kind: ModelKind, params: ModelParams, u):
    """Inverse cdf at ``u`` in (0, 1).

    Weibull is inverted in closed form; the others by bisection on the cdf
    to a relative tolerance of 1e-12 on the variate.
    """
    check_params(kind, params)
    arr = np.asarray(u, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("quantile requires 0 < u < 1")
    return _unwrap(kernels.quantile_array(int(kind), params.phi, params.theta, arr), u)


def median(kind: ModelKind, params: ModelParams) -> float:
    check_params(kind, params)
    if kind == ModelKind.LOGNORMAL:
        return math.exp(params.phi)
    if kind == ModelKind.WEIBULL:
        return params.theta * math.log(2.0) ** (1.0 / params.phi)
    return float(quantile(kind, params, 0.5))


def scale_of(kind: ModelKind, params: ModelParams) -> float:
    """Characteristic volume-price scale of the model (``e^phi`` for LogNormal)."""
    if kind == ModelKind.LOGNORMAL:
        return math.exp(params.phi)
    return params.theta


def log_gamma(x: float) -> float:
    """``ln Gamma(x)`` for finite ``x > 0``."""
    x = float(x)
    if not (x > 0.0 and math.isfinite(x)):
        raise DomainError(f"log_gamma requires finite x > 0, got {x!r}")
    return kernels.log_gamma(x)


def regularized_incomplete_gamma(a: float, x: float, tail: str = "lower") -> float:
    """Regularized incomplete gamma ``P(a, x)`` (``tail="lower"``) or ``Q(a, x)``."""
    a, x = float(a), float(x)
    if not (a > 0.0 and math.isfinite(a)):
        raise DomainError(f"incomplete gamma requires finite a > 0, got {a!r}")
    if not x >= 0.0:
        raise DomainError(f"incomplete gamma requires x >= 0, got {x!r}")
    p, q = kernels.gammainc_pair(a, x)
    if tail == "lower":
        return p
    if tail == "upper":
        return q
    raise ValueError(f"tail must be 'lower' or 'upper', got {tail!r}")
