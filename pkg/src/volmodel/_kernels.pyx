# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels; same surface as ``volmodel._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, erfc, fabs, isinf, sqrt, NAN

cnp.import_array()

cdef double EULER_GAMMA = 0.5772156649015329
cdef double HALF_LOG_2PI = 0.9189385332046728
cdef double SQRT2 = 1.4142135623730951
cdef double EPS = 2.220446049250313e-16
cdef double TINY = 1e-300
cdef int MAX_ITER = 100000

GAMMA = 0
INVERSE_GAMMA = 1
LOGNORMAL = 2
WEIBULL = 3

cdef double[40] ZETA_SERIES
ZETA_SERIES[:] = [
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
]

cdef double[8] STIRLING
STIRLING[:] = [
    0.08333333333333333, -0.002777777777777778, 0.0007936507936507937,
    -0.0005952380952380953, 0.0008417508417508417, -0.0019175269175269176,
    0.00641025641025641, -0.029550653594771242,
]


cdef inline double _lgamma_near2(double e) noexcept nogil:
    cdef double acc = 0.0, p = e * e, term
    cdef int k
    for k in range(40):
        term = ZETA_SERIES[k] * p
        acc += term
        if fabs(term) <= 1e-17 * fabs(acc):
            break
        p *= e
    return (1.0 - EULER_GAMMA) * e + acc


cdef double _log_gamma(double x) noexcept nogil:
    cdef double y, prod, inv, inv2, corr, p, e
    cdef int k
    if not x > 0.0 or isinf(x):
        return NAN
    if x < 0.5:
        return _log_gamma(x + 1.0) - log(x)
    if x < 1.5:
        e = x - 1.0
        return _lgamma_near2(e) - log1p(e)
    if x <= 2.5:
        return _lgamma_near2(x - 2.0)
    if x < 10.0:
        y = x
        prod = 1.0
        while y > 2.5:
            y -= 1.0
            prod *= y
        return _lgamma_near2(y - 2.0) + log(prod)
    inv = 1.0 / x
    inv2 = inv * inv
    corr = 0.0
    p = inv
    for k in range(8):
        corr += STIRLING[k] * p
        p *= inv2
    return (x - 0.5) * log(x) - x + HALF_LOG_2PI + corr


cdef inline double _prefactor(double a, double x, double logx, double lga) noexcept nogil:
    return exp(a * logx - x - lga)


cdef int _gammainc(double a, double x, double logx, double lga, double* p, double* q) noexcept nogil:
    """Fill P(a, x) and Q(a, x); returns nonzero on non-convergence."""
    cdef double ap, term, total, b, c, d, h, an, delta
    cdef int i
    if x == 0.0:
        p[0] = 0.0
        q[0] = 1.0
        return 0
    if isinf(x):
        p[0] = 1.0
        q[0] = 0.0
        return 0
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for i in range(MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * EPS:
                total *= _prefactor(a, x, logx, lga)
                if total > 1.0:
                    total = 1.0
                p[0] = total
                q[0] = 1.0 - total
                return 0
        return 1
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < TINY:
            d = TINY
        c = b + an / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < EPS:
            h *= _prefactor(a, x, logx, lga)
            if h > 1.0:
                h = 1.0
            q[0] = h
            p[0] = 1.0 - h
            return 0
    return 1


cdef inline double _logpdf1(int kind, double phi, double theta, double s, double lga) noexcept nogil:
    cdef double ls = log(s), z
    if kind == 0:
        return (phi - 1.0) * ls - phi * log(theta) - lga - s / theta
    if kind == 1:
        return phi * log(theta) - lga - (phi + 1.0) * ls - theta / s
    if kind == 2:
        z = (ls - phi) / theta
        return -HALF_LOG_2PI - log(theta) - ls - 0.5 * z * z
    z = ls - log(theta)
    return log(phi) - ls + phi * z - exp(phi * z)


cdef inline int _cdf_point(int kind, double phi, double theta, double logtheta, double s,
                           double ls, double lga, double* c, double* q) noexcept nogil:
    cdef double z, t
    if kind == 0:
        return _gammainc(phi, s / theta, ls - logtheta, lga, c, q)
    if kind == 1:
        return _gammainc(phi, theta / s, logtheta - ls, lga, q, c)
    if kind == 2:
        z = (ls - phi) / (theta * SQRT2)
        c[0] = 0.5 * erfc(-z)
        q[0] = 0.5 * erfc(z)
        return 0
    t = exp(phi * (ls - logtheta))
    c[0] = -expm1(-t)
    q[0] = exp(-t)
    return 0


cdef inline int _cdf_sf1(int kind, double phi, double theta, double s, double lga,
                         double* c, double* q) noexcept nogil:
    return _cdf_point(kind, phi, theta, log(theta), s, log(s), lga, c, q)


cdef inline double _lga_for(int kind, double phi) noexcept nogil:
    if kind == 0 or kind == 1:
        return _log_gamma(phi)
    return 0.0


def log_gamma(double x):
    if not x > 0.0 or isinf(x):
        raise ValueError(f"log_gamma requires finite x > 0, got {x!r}")
    return _log_gamma(x)


def gammainc_pair(double a, double x):
    """Return ``(P(a, x), Q(a, x))`` computed so both tails keep full precision."""
    cdef double p, q
    if not a > 0.0 or isinf(a):
        raise ValueError(f"incomplete gamma requires finite a > 0, got {a!r}")
    if not x >= 0.0:
        raise ValueError(f"incomplete gamma requires x >= 0, got {x!r}")
    if _gammainc(a, x, log(x), _log_gamma(a), &p, &q):
        raise ArithmeticError(f"incomplete gamma did not converge (a={a}, x={x})")
    return p, q


def gammainc_lower(double a, double x):
    return gammainc_pair(a, x)[0]


def gammainc_upper(double a, double x):
    return gammainc_pair(a, x)[1]


def logpdf_array(int kind, double phi, double theta, s):
    cdef cnp.ndarray arr = np.ascontiguousarray(s, dtype=np.float64)
    cdef cnp.ndarray out = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double lga = _lga_for(kind, phi)
    with nogil:
        for i in range(n):
            dst[i] = _logpdf1(kind, phi, theta, src[i], lga)
    return out


def pdf_array(int kind, double phi, double theta, s):
    return np.exp(logpdf_array(kind, phi, theta, s))


cdef _tails(int kind, double phi, double theta, s, bint want_sf):
    cdef cnp.ndarray arr = np.ascontiguousarray(s, dtype=np.float64)
    cdef cnp.ndarray out = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double lga = _lga_for(kind, phi), c, q
    cdef int bad = 0
    with nogil:
        for i in range(n):
            bad |= _cdf_sf1(kind, phi, theta, src[i], lga, &c, &q)
            dst[i] = q if want_sf else c
    if bad:
        raise ArithmeticError("incomplete gamma did not converge")
    return out


def cdf_array(int kind, double phi, double theta, s):
    return _tails(kind, phi, theta, s, False)


def sf_array(int kind, double phi, double theta, s):
    return _tails(kind, phi, theta, s, True)


def cdf_sse(int kind, double phi, double theta, s, fhat):
    """Sum of squared differences between the model cdf and ``fhat`` at ``s``."""
    cdef double[::1] xs = np.ascontiguousarray(s, dtype=np.float64)
    cdef double[::1] fs = np.ascontiguousarray(fhat, dtype=np.float64)
    cdef Py_ssize_t i, n = xs.shape[0]
    cdef double lga = _lga_for(kind, phi), lt = log(theta), c, q, r, total = 0.0
    cdef int bad = 0
    if fs.shape[0] != n:
        raise ValueError("s and fhat differ in length")
    with nogil:
        for i in range(n):
            bad |= _cdf_point(kind, phi, theta, lt, xs[i], log(xs[i]), lga, &c, &q)
            r = c - fs[i]
            total += r * r
    if bad:
        raise ArithmeticError("incomplete gamma did not converge")
    return total


cdef inline double _tail_at(int kind, double phi, double theta, double ls, double lga,
                            bint upper) noexcept nogil:
    cdef double c, q
    _cdf_sf1(kind, phi, theta, exp(ls), lga, &c, &q)
    return q if upper else c


cdef inline bint _below(double t, double target, bint upper) noexcept nogil:
    # root lies above the probe point
    return t > target if upper else t < target


cdef double _bisect_quantile(int kind, double phi, double theta, double u,
                             double rtol, double lga) noexcept nogil:
    cdef bint upper = u > 0.5
    cdef double target = 1.0 - u if upper else u
    cdef double lo = log(theta) - 1.0, hi = log(theta) + 1.0
    cdef double step = 1.0, mid, t, scale
    cdef int it
    while not _below(_tail_at(kind, phi, theta, lo, lga, upper), target, upper):
        step *= 2.0
        lo -= step
        if lo < -745.0:
            lo = -745.0
            break
    step = 1.0
    while _below(_tail_at(kind, phi, theta, hi, lga, upper), target, upper):
        step *= 2.0
        hi += step
        if hi > 709.0:
            hi = 709.0
            break
    mid = 0.5 * (lo + hi)
    for it in range(400):
        mid = 0.5 * (lo + hi)
        t = _tail_at(kind, phi, theta, mid, lga, upper)
        if fabs(t - target) <= rtol * target:
            break
        if _below(t, target, upper):
            lo = mid
        else:
            hi = mid
        scale = fabs(mid) if fabs(mid) > 1.0 else 1.0
        if hi - lo <= 4.0 * EPS * scale:
            break
    return exp(mid)


def quantile_array(int kind, double phi, double theta, u, double rtol=1e-12):
    """Inverse cdf at each uniform variate in the open interval (0, 1)."""
    cdef cnp.ndarray arr = np.ascontiguousarray(u, dtype=np.float64)
    cdef cnp.ndarray out = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double lga = _lga_for(kind, phi), v
    for i in range(n):
        if not (0.0 < src[i] < 1.0):
            raise ValueError(f"uniform variate must lie in (0, 1), got {src[i]!r}")
    with nogil:
        for i in range(n):
            v = src[i]
            if kind == 3:
                dst[i] = theta * exp(log(-log1p(-v)) / phi)
            else:
                dst[i] = _bisect_quantile(kind, phi, theta, v, rtol, lga)
    return out


cdef double _free_sse(int kind, double x0, double x1, double[::1] s, double[::1] ls,
                      double[::1] fhat, double penalty) noexcept nogil:
    cdef double phi, theta, lga, c, q, r, total = 0.0
    cdef Py_ssize_t i, n = s.shape[0]
    if not (fabs(x0) <= 1e308 and fabs(x1) <= 700.0):
        return penalty
    if kind == 2:
        phi = x0
    else:
        if fabs(x0) > 700.0:
            return penalty
        phi = exp(x0)
    theta = exp(x1)
    lga = _lga_for(kind, phi)
    for i in range(n):
        if _cdf_point(kind, phi, theta, x1, s[i], ls[i], lga, &c, &q):
            return penalty
        r = c - fhat[i]
        total += r * r
    if not fabs(total) <= 1e308:
        return penalty
    return total


cdef inline double _dist(double* a, double* b) noexcept nogil:
    return sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))


def nelder_mead_sse(int kind, double x0, double x1, double step, s, fhat,
                    double diameter_tol=1e-8, int maxfev=2000):
    """Minimize the cdf residual sum of squares over the 2-D optimizer coordinates.

    Same algorithm and stopping rule as the pure-Python kernel.
    """
    cdef double[::1] xs = np.ascontiguousarray(s, dtype=np.float64)
    cdef double[::1] fs_ = np.ascontiguousarray(fhat, dtype=np.float64)
    cdef double[::1] lxs = np.log(xs)
    cdef double penalty = xs.shape[0] + 1.0
    cdef double sim[3][2]
    cdef double fv[3]
    cdef double tmp[2]
    cdef double xr[2]
    cdef double xe[2]
    cdef double xc[2]
    cdef double fr, fe, fc, ft, cx, cy, wx, wy, diam, d
    cdef int nfev = 3, i, j
    cdef bint converged = False
    if fs_.shape[0] != xs.shape[0]:
        raise ValueError("s and fhat differ in length")
    with nogil:
        sim[0][0] = x0
        sim[0][1] = x1
        sim[1][0] = x0 + step
        sim[1][1] = x1
        sim[2][0] = x0
        sim[2][1] = x1 + step
        for i in range(3):
            fv[i] = _free_sse(kind, sim[i][0], sim[i][1], xs, lxs, fs_, penalty)
        while True:
            # stable insertion sort of three vertices by value
            for i in range(1, 3):
                j = i
                while j > 0 and fv[j] < fv[j - 1]:
                    ft = fv[j]; fv[j] = fv[j - 1]; fv[j - 1] = ft
                    tmp[0] = sim[j][0]; tmp[1] = sim[j][1]
                    sim[j][0] = sim[j - 1][0]; sim[j][1] = sim[j - 1][1]
                    sim[j - 1][0] = tmp[0]; sim[j - 1][1] = tmp[1]
                    j -= 1
            diam = _dist(sim[0], sim[1])
            d = _dist(sim[0], sim[2])
            if d > diam:
                diam = d
            d = _dist(sim[1], sim[2])
            if d > diam:
                diam = d
            if diam < diameter_tol:
                converged = True
                break
            if nfev >= maxfev:
                break
            cx = 0.5 * (sim[0][0] + sim[1][0])
            cy = 0.5 * (sim[0][1] + sim[1][1])
            wx = sim[2][0]
            wy = sim[2][1]
            xr[0] = 2.0 * cx - wx
            xr[1] = 2.0 * cy - wy
            fr = _free_sse(kind, xr[0], xr[1], xs, lxs, fs_, penalty)
            nfev += 1
            if fr < fv[0]:
                xe[0] = 3.0 * cx - 2.0 * wx
                xe[1] = 3.0 * cy - 2.0 * wy
                fe = _free_sse(kind, xe[0], xe[1], xs, lxs, fs_, penalty)
                nfev += 1
                if fe < fr:
                    sim[2][0] = xe[0]; sim[2][1] = xe[1]; fv[2] = fe
                else:
                    sim[2][0] = xr[0]; sim[2][1] = xr[1]; fv[2] = fr
                continue
            if fr < fv[1]:
                sim[2][0] = xr[0]; sim[2][1] = xr[1]; fv[2] = fr
                continue
            if fr < fv[2]:
                xc[0] = 1.5 * cx - 0.5 * wx
                xc[1] = 1.5 * cy - 0.5 * wy
                fc = _free_sse(kind, xc[0], xc[1], xs, lxs, fs_, penalty)
                nfev += 1
                if fc <= fr:
                    sim[2][0] = xc[0]; sim[2][1] = xc[1]; fv[2] = fc
                    continue
            else:
                xc[0] = 0.5 * (cx + wx)
                xc[1] = 0.5 * (cy + wy)
                fc = _free_sse(kind, xc[0], xc[1], xs, lxs, fs_, penalty)
                nfev += 1
                if fc < fv[2]:
                    sim[2][0] = xc[0]; sim[2][1] = xc[1]; fv[2] = fc
                    continue
            for i in range(1, 3):
                sim[i][0] = sim[0][0] + 0.5 * (sim[i][0] - sim[0][0])
                sim[i][1] = sim[0][1] + 0.5 * (sim[i][1] - sim[0][1])
                fv[i] = _free_sse(kind, sim[i][0], sim[i][1], xs, lxs, fs_, penalty)
            nfev += 2
    return sim[0][0], sim[0][1], fv[0], nfev, converged
