"""Least-squares fits of the model cdfs to a window's ECDF."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .distributions import DomainError, ModelKind, ModelParams, check_params
from .empirical import DegenerateSampleError, EmpiricalDistribution

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
MAX_EVAL_PER_START = 2000
DIAMETER_TOL = 1e-8
RESTART_SPREAD = 0.25
SIMPLEX_STEP = 0.1
FD_STEP = 1e-5


class UnidentifiableFitError(ArithmeticError):
    """Residual Jacobian is rank deficient; parameter errors are undefined."""


@dataclass(frozen=True)
class FitResult:
    kind: ModelKind
    params: ModelParams
    rel_err_phi: float
    rel_err_theta: float
    sse: float
    n_eval: int
    converged: bool


def initial_params(kind: ModelKind, samples) -> ModelParams:
    """Method-of-moments starting point for ``kind``.

    Gamma and InverseGamma match the sample mean ``m`` and variance ``v``;
    LogNormal uses the mean and standard deviation of ``log s``; Weibull
    matches the log-sample standard deviation to ``pi / (phi sqrt 6)``.
    """
    s = np.asarray(samples, dtype=np.float64).ravel()
    if len(s) < 2 or not np.all(s > 0.0):
        raise ValueError("initial_params needs at least 2 positive samples")
    m = float(np.mean(s))
    v = float(np.var(s, ddof=1))
    if v <= 0.0:
        raise DegenerateSampleError("zero sample variance")
    if kind == ModelKind.GAMMA:
        return ModelParams(m * m / v, v / m)
    if kind == ModelKind.INVERSE_GAMMA:
        phi = m * m / v + 2.0
        return ModelParams(phi, m * (phi - 1.0))
    logs = np.log(s)
    mu = float(np.mean(logs))
    sd = float(np.std(logs, ddof=1))
    if sd <= 0.0:
        raise DegenerateSampleError("zero spread of log-samples")
    if kind == ModelKind.LOGNORMAL:
        return ModelParams(mu, sd)
    phi = math.pi / (sd * math.sqrt(6.0))
    return ModelParams(phi, math.exp(mu + EULER_GAMMA / phi))


def _to_free(kind: ModelKind, p: ModelParams) -> np.ndarray:
    phi = p.phi if kind == ModelKind.LOGNORMAL else math.log(p.phi)
    return np.array([phi, math.log(p.theta)])


def _from_free(kind: ModelKind, x) -> ModelParams:
    phi = float(x[0]) if kind == ModelKind.LOGNORMAL else math.exp(x[0])
    return ModelParams(phi, math.exp(x[1]))


def _sse(kind: ModelKind, params: ModelParams, emp: EmpiricalDistribution) -> float:
    return kernels.cdf_sse(int(kind), params.phi, params.theta, emp.ecdf_s, emp.ecdf_f)


def restart_points(kind: ModelKind, start: ModelParams, seed: int = 0) -> list[ModelParams]:
    """``start`` plus two restarts offset by 25% per coordinate.

    The seed picks the sign pattern of the first restart; the second uses
    the opposite signs. LogNormal's location moves by 25% of
    ``max(|phi|, theta)`` since it may sit at zero.
    """
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=2)
    points = [start]
    for sg in (signs, -signs):
        if kind == ModelKind.LOGNORMAL:
            phi = start.phi + sg[0] * RESTART_SPREAD * max(abs(start.phi), start.theta)
        else:
            phi = start.phi * (1.0 + sg[0] * RESTART_SPREAD)
        points.append(ModelParams(phi, start.theta * (1.0 + sg[1] * RESTART_SPREAD)))
    return points


def fit_cdf(
    kind: ModelKind,
    emp: EmpiricalDistribution,
    seed: int = 0,
    start: ModelParams | None = None,
) -> FitResult:
    """Fit ``kind`` to the ECDF of ``emp`` by least squares.

    Nelder-Mead runs in ``(log phi, log theta)`` (``(phi, log theta)`` for
    LogNormal) from the moment estimate and two perturbed restarts; the
    lowest residual wins. Non-convergence is reported, not raised.
    """
    kind = ModelKind(kind)
    emp.validate()
    if start is None:
        start = initial_params(kind, _samples_hint(emp))
    check_params(kind, start)
    best = None
    n_eval = 0
    for p0 in restart_points(kind, start, seed):
        x0, x1 = _to_free(kind, p0)
        y0, y1, fx, nfev, ok = kernels.nelder_mead_sse(
            int(kind), x0, x1, SIMPLEX_STEP, emp.ecdf_s, emp.ecdf_f,
            DIAMETER_TOL, MAX_EVAL_PER_START,
        )
        n_eval += nfev
        if best is None or fx < best[1]:
            best = ((y0, y1), fx, bool(ok))
    x, _, converged = best
    params = _from_free(kind, x)
    try:
        check_params(kind, params)
    except DomainError:
        converged = False
    sse = _sse(kind, params, emp) if converged else float(best[1])
    rel_phi = rel_theta = math.inf
    if converged:
        try:
            rel_phi, rel_theta = relative_errors(kind, params, emp)
        except UnidentifiableFitError:
            log.info("%s fit is unidentifiable; relative errors set to inf", kind.label)
    return FitResult(kind, params, rel_phi, rel_theta, sse, n_eval, converged)


def _samples_hint(emp: EmpiricalDistribution) -> np.ndarray:
    """Reconstruct a sample multiset from the ECDF steps for moment estimates."""
    steps = np.diff(np.concatenate([[0.0], emp.ecdf_f]))
    n = emp.n if emp.n > 1 else len(emp.ecdf_s)
    weights = np.maximum(np.rint(steps * n), 0).astype(np.int64)
    if weights.sum() < 2:
        weights = np.ones(len(emp.ecdf_s), dtype=np.int64)
    return np.repeat(emp.ecdf_s, weights)


def residual_jacobian(kind: ModelKind, params: ModelParams, emp: EmpiricalDistribution) -> np.ndarray:
    """Central-difference Jacobian of the cdf residuals w.r.t. ``(phi, theta)``."""
    code = int(kind)
    cols = []
    for j, value in enumerate((params.phi, params.theta)):
        h = FD_STEP * abs(value) if value != 0.0 else FD_STEP
        up = [params.phi, params.theta]
        dn = [params.phi, params.theta]
        up[j] += h
        dn[j] -= h
        cu = kernels.cdf_array(code, up[0], up[1], emp.ecdf_s)
        cd = kernels.cdf_array(code, dn[0], dn[1], emp.ecdf_s)
        cols.append((cu - cd) / (2.0 * h))
    return np.column_stack(cols)


def relative_errors(kind: ModelKind, params: ModelParams, emp: EmpiricalDistribution) -> tuple[float, float]:
    """Asymptotic least-squares standard errors of ``(phi, theta)``, relative to their values."""
    kind = ModelKind(kind)
    check_params(kind, params)
    k = len(emp.ecdf_s)
    if k <= 2:
        raise UnidentifiableFitError("need more than 2 ECDF points for parameter errors")
    jac = residual_jacobian(kind, params, emp)
    sv = np.linalg.svd(jac, compute_uv=False)
    if not np.all(np.isfinite(sv)) or sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise UnidentifiableFitError(f"{kind.label} residual Jacobian is rank deficient")
    s2 = _sse(kind, params, emp) / (k - 2)
    cov = s2 * np.linalg.inv(jac.T @ jac)
    return (
        math.sqrt(max(cov[0, 0], 0.0)) / abs(params.phi) if params.phi != 0.0 else math.inf,
        math.sqrt(max(cov[1, 1], 0.0)) / abs(params.theta),
    )
