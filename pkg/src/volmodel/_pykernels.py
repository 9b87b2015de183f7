"""Pure-Python numerical kernels.

Reference implementation of the hot loops. The compiled ``_kernels``
extension exposes the same functions with the same signatures; this module
is used when the extension is unavailable or ``VOLMODEL_PURE=1`` is set.

Model kinds are passed as integer codes: 0 Gamma, 1 InverseGamma,
2 LogNormal, 3 Weibull.
"""
from __future__ import annotations

import math

import numpy as np

GAMMA = 0
INVERSE_GAMMA = 1
LOGNORMAL = 2
WEIBULL = 3

EULER_GAMMA = 0.5772156649015329
HALF_LOG_2PI = 0.9189385332046728
SQRT2 = 1.4142135623730951

# (-1)^k (zeta(k) - 1) / k for k = 2..41, series of lgamma about x = 2
ZETA_SERIES = (
    0.3224670334241132, -0.0673523010531981, 0.020580808427784546,
    -0.007385551028673986, 0.0028905103307415234, -0.001192753911703261,
    0.0005096695247430425, -0.00022315475845357939, 9.945751278180853e-05,
    -4.492623673813314e-05, 2.050721277567069e-05, -9.439488275268397e-06,
    4.374866789907488e-06, -2.039215753801366e-06, 9.55141213040742e-07,
    -4.492469198764566e-07, 2.1207184805554665e-07, -1.0043224823968099e-07,
    4.7698101693639804e-08, -2.2711094608943164e-08, 1.0838659214896955e-08,
    -5.183475041970047e-09, 2.4836745438024785e-09, -1.1921401405860912e-09,
    5.731367241678862e-10, -2.7595228851242334e-10, 1.330476437424449e-10,
    -6.4229645638381e-11, 3.1044247747322276e-11, -1.5021384080754142e-11,
    7.275974480239079e-12, -3.527742476575915e-12, 1.711991790559618e-12,
    -8.315385841420285e-13, 4.04220052528944e-13, -1.9664756310966165e-13,
    9.573630387838556e-14, -4.6640760264283744e-14, 2.2737369600659724e-14,
    -1.1091399470834522e-14,
)

# B_2k / (2k (2k - 1)), Stirling series for x >= 10
STIRLING = (
    0.08333333333333333, -0.002777777777777778, 0.0007936507936507937,
    -0.0005952380952380953, 0.0008417508417508417, -0.0019175269175269176,
    0.00641025641025641, -0.029550653594771242,
)

EPS = 2.220446049250313e-16
TINY = 1e-300
MAX_ITER = 100000


def _lgamma_near2(e):
    # lgamma(2 + e), |e| <= 0.5
    acc = 0.0
    p = e * e
    for c in ZETA_SERIES:
        term = c * p
        acc += term
        if abs(term) <= 1e-17 * abs(acc):
            break
        p *= e
    return (1.0 - EULER_GAMMA) * e + acc


def log_gamma(x):
    if not x > 0.0 or math.isinf(x):
        raise ValueError(f"log_gamma requires finite x > 0, got {x!r}")
    if x < 0.5:
        return log_gamma(x + 1.0) - math.log(x)
    if x < 1.5:
        e = x - 1.0
        return _lgamma_near2(e) - math.log1p(e)
    if x <= 2.5:
        return _lgamma_near2(x - 2.0)
    if x < 10.0:
        y = x
        prod = 1.0
        while y > 2.5:
            y -= 1.0
            prod *= y
        return _lgamma_near2(y - 2.0) + math.log(prod)
    inv = 1.0 / x
    inv2 = inv * inv
    corr = 0.0
    p = inv
    for c in STIRLING:
        corr += c * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + HALF_LOG_2PI + corr


def _gamma_prefactor(a, x, logx, lga):
    # x^a e^-x / Gamma(a), in log space
    return math.exp(a * logx - x - lga)


def _gamma_series(a, x, logx, lga):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            return total * _gamma_prefactor(a, x, logx, lga)
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_contfrac(a, x, logx, lga):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h * _gamma_prefactor(a, x, logx, lga)
    raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")


def gammainc_pair(a, x):
    """Return ``(P(a, x), Q(a, x))`` computed so both tails keep full precision."""
    if not a > 0.0 or math.isinf(a):
        raise ValueError(f"incomplete gamma requires finite a > 0, got {a!r}")
    if not x >= 0.0:
        raise ValueError(f"incomplete gamma requires x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0, 1.0
    return _gammainc(a, x, math.log(x) if x != math.inf else math.inf, log_gamma(a))


def _gammainc(a, x, logx, lga):
    if x == 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        p = min(_gamma_series(a, x, logx, lga), 1.0)
        return p, 1.0 - p
    q = min(_gamma_contfrac(a, x, logx, lga), 1.0)
    return 1.0 - q, q


def gammainc_lower(a, x):
    return gammainc_pair(a, x)[0]


def gammainc_upper(a, x):
    return gammainc_pair(a, x)[1]


def _logpdf1(kind, phi, theta, s, lga):
    ls = math.log(s)
    if kind == GAMMA:
        return (phi - 1.0) * ls - phi * math.log(theta) - lga - s / theta
    if kind == INVERSE_GAMMA:
        return phi * math.log(theta) - lga - (phi + 1.0) * ls - theta / s
    if kind == LOGNORMAL:
        z = (ls - phi) / theta
        return -HALF_LOG_2PI - math.log(theta) - ls - 0.5 * z * z
    z = ls - math.log(theta)
    return math.log(phi) - ls + phi * z - math.exp(phi * z)


def _cdf_point(kind, phi, theta, logtheta, s, ls, lga):
    """(cdf, survival) at one point, given ``log s`` and ``log theta``."""
    if kind == GAMMA:
        return _gammainc(phi, s / theta, ls - logtheta, lga)
    if kind == INVERSE_GAMMA:
        p, q = _gammainc(phi, theta / s, logtheta - ls, lga)
        return q, p
    if kind == LOGNORMAL:
        z = (ls - phi) / (theta * SQRT2)
        return 0.5 * math.erfc(-z), 0.5 * math.erfc(z)
    t = math.exp(phi * (ls - logtheta))
    return -math.expm1(-t), math.exp(-t)


def _cdf_sf1(kind, phi, theta, s):
    return _cdf_point(kind, phi, theta, math.log(theta), s, math.log(s), _lga_for(kind, phi))


def _lga_for(kind, phi):
    return log_gamma(phi) if kind in (GAMMA, INVERSE_GAMMA) else 0.0


def logpdf_array(kind, phi, theta, s):
    s = np.asarray(s, dtype=np.float64)
    lga = _lga_for(kind, phi)
    out = np.empty(s.shape)
    flat = out.reshape(-1)
    for i, v in enumerate(s.reshape(-1)):
        flat[i] = _logpdf1(kind, phi, theta, float(v), lga)
    return out


def pdf_array(kind, phi, theta, s):
    return np.exp(logpdf_array(kind, phi, theta, s))


def _tails(kind, phi, theta, s, which):
    s = np.asarray(s, dtype=np.float64)
    lga = _lga_for(kind, phi)
    lt = math.log(theta)
    out = np.empty(s.shape)
    flat = out.reshape(-1)
    for i, v in enumerate(s.reshape(-1).tolist()):
        flat[i] = _cdf_point(kind, phi, theta, lt, v, math.log(v), lga)[which]
    return out


def cdf_array(kind, phi, theta, s):
    return _tails(kind, phi, theta, s, 0)


def sf_array(kind, phi, theta, s):
    return _tails(kind, phi, theta, s, 1)


def _sse_logs(kind, phi, theta, logtheta, s, ls, fhat):
    lga = _lga_for(kind, phi)
    total = 0.0
    for v, lv, f in zip(s, ls, fhat):
        r = _cdf_point(kind, phi, theta, logtheta, v, lv, lga)[0] - f
        total += r * r
    return total


def cdf_sse(kind, phi, theta, s, fhat):
    """Sum of squared differences between the model cdf and ``fhat`` at ``s``."""
    s = np.asarray(s, dtype=np.float64)
    fhat = np.asarray(fhat, dtype=np.float64)
    if s.shape != fhat.shape:
        raise ValueError("s and fhat differ in length")
    return _sse_logs(kind, phi, theta, math.log(theta), s.tolist(), np.log(s).tolist(), fhat.tolist())


def _bisect_quantile(kind, phi, theta, u, rtol):
    # Solve on log s; the lower tail is matched for u <= 1/2 and the upper
    # tail otherwise so both ends keep relative precision.
    upper = u > 0.5
    target = 1.0 - u if upper else u
    lo = math.log(theta) - 1.0
    hi = math.log(theta) + 1.0

    def tail(ls):
        c, q = _cdf_sf1(kind, phi, theta, math.exp(ls))
        return q if upper else c

    def below(ls):
        # True when the root lies above ls
        return tail(ls) > target if upper else tail(ls) < target

    step = 1.0
    while below(lo) is False:
        step *= 2.0
        lo -= step
        if lo < -745.0:
            lo = -745.0
            break
    step = 1.0
    while below(hi):
        step *= 2.0
        hi += step
        if hi > 709.0:
            hi = 709.0
            break
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        t = tail(mid)
        if abs(t - target) <= rtol * target:
            break
        if below(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4.0 * EPS * max(1.0, abs(mid)):
            break
    return math.exp(mid)


def quantile_array(kind, phi, theta, u, rtol=1e-12):
    """Inverse cdf at each uniform variate in the open interval (0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    out = np.empty(u.shape)
    flat = out.reshape(-1)
    for i, v in enumerate(u.reshape(-1)):
        v = float(v)
        if not 0.0 < v < 1.0:
            raise ValueError(f"uniform variate must lie in (0, 1), got {v!r}")
        if kind == WEIBULL:
            flat[i] = theta * math.exp(math.log(-math.log1p(-v)) / phi)
        else:
            flat[i] = _bisect_quantile(kind, phi, theta, v, rtol)
    return out


def _free_sse(kind, x0, x1, s, ls, fhat, penalty):
    # objective in optimizer coordinates: (log phi | phi, log theta)
    if not (math.isfinite(x0) and math.isfinite(x1)) or abs(x1) > 700.0:
        return penalty
    if kind == LOGNORMAL:
        phi = x0
    else:
        if abs(x0) > 700.0:
            return penalty
        phi = math.exp(x0)
    try:
        value = _sse_logs(kind, phi, math.exp(x1), x1, s, ls, fhat)
    except ArithmeticError:
        return penalty
    return value if math.isfinite(value) else penalty


def nelder_mead_sse(kind, x0, x1, step, s, fhat, diameter_tol=1e-8, maxfev=2000):
    """Minimize the cdf residual sum of squares over the 2-D optimizer coordinates.

    Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2) from the simplex ``x, x + step e1, x + step e2``; stops when
    the simplex diameter drops below ``diameter_tol`` or after ``maxfev``
    evaluations. Returns ``(x0, x1, fmin, nfev, converged)``.
    """
    s = np.asarray(s, dtype=np.float64)
    ls = np.log(s).tolist()
    fhat = np.asarray(fhat, dtype=np.float64).tolist()
    penalty = float(len(s)) + 1.0
    s = s.tolist()

    def f(p):
        return _free_sse(kind, p[0], p[1], s, ls, fhat, penalty)

    sim = [[x0, x1], [x0 + step, x1], [x0, x1 + step]]
    fs = [f(v) for v in sim]
    nfev = 3
    converged = False
    while True:
        order = sorted(range(3), key=lambda i: fs[i])
        sim = [sim[i] for i in order]
        fs = [fs[i] for i in order]
        diam = max(math.hypot(sim[i][0] - sim[j][0], sim[i][1] - sim[j][1])
                   for i, j in ((0, 1), (0, 2), (1, 2)))
        if diam < diameter_tol:
            converged = True
            break
        if nfev >= maxfev:
            break
        cx = 0.5 * (sim[0][0] + sim[1][0])
        cy = 0.5 * (sim[0][1] + sim[1][1])
        wx, wy = sim[2]
        xr = [2.0 * cx - wx, 2.0 * cy - wy]
        fr = f(xr)
        nfev += 1
        if fr < fs[0]:
            xe = [3.0 * cx - 2.0 * wx, 3.0 * cy - 2.0 * wy]
            fe = f(xe)
            nfev += 1
            if fe < fr:
                sim[2], fs[2] = xe, fe
            else:
                sim[2], fs[2] = xr, fr
            continue
        if fr < fs[1]:
            sim[2], fs[2] = xr, fr
            continue
        if fr < fs[2]:
            xc = [1.5 * cx - 0.5 * wx, 1.5 * cy - 0.5 * wy]
            fc = f(xc)
            nfev += 1
            if fc <= fr:
                sim[2], fs[2] = xc, fc
                continue
        else:
            xc = [0.5 * (cx + wx), 0.5 * (cy + wy)]
            fc = f(xc)
            nfev += 1
            if fc < fs[2]:
                sim[2], fs[2] = xc, fc
                continue
        for i in (1, 2):
            sim[i] = [sim[0][0] + 0.5 * (sim[i][0] - sim[0][0]),
                      sim[0][1] + 0.5 * (sim[i][1] - sim[0][1])]
            fs[i] = f(sim[i])
        nfev += 2
    return sim[0][0], sim[0][1], fs[0], nfev, converged
