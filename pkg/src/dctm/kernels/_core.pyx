# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-observation likelihood terms (hot kernel of the sampler)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, log1p, INFINITY, isfinite
from scipy.special.cython_special cimport log_ndtr

cnp.import_array()

DEF LOGIT = 0
DEF PROBIT = 1
DEF CLOGLOG = 2

cdef double LOG_SQRT_2PI = 0.9189385332046727417803297364056


cdef inline double _log_expit(double z) nogil:
    if z >= 0.0:
        return -log1p(exp(-z))
    return z - log1p(exp(z))


cdef inline double _log_cdf(int code, double z) nogil:
    cdef double t
    if code == LOGIT:
        return _log_expit(z)
    if code == PROBIT:
        return log_ndtr(z)
    t = exp(z)
    if t < 1e-8:
        return z + log1p(-0.5 * t)
    t = -expm1(-t)
    if t <= 0.0:
        return -INFINITY
    return log(t)


cdef inline double _log_sf(int code, double z) nogil:
    if code == LOGIT:
        return _log_expit(-z)
    if code == PROBIT:
        return log_ndtr(-z)
    return -exp(z)


cdef inline double _log_pdf(int code, double z) nogil:
    if code == LOGIT:
        return _log_expit(z) + _log_expit(-z)
    if code == PROBIT:
        return -0.5 * z * z - LOG_SQRT_2PI
    return z - exp(z)


def pmf_terms(int code,
              double[::1] upper,
              double[::1] lower,
              cnp.uint8_t[::1] lower_sent,
              cnp.uint8_t[::1] upper_sent):
    """Same contract as dctm.kernels._ref.pmf_terms."""
    cdef Py_ssize_t n = upper.shape[0]
    lp_arr = np.empty(n)
    wu_arr = np.zeros(n)
    wl_arr = np.zeros(n)
    cdef double[::1] lp = lp_arr
    cdef double[::1] wu = wu_arr
    cdef double[::1] wl = wl_arr
    cdef Py_ssize_t i
    cdef double u, l, a, b, d, val, w
    with nogil:
        for i in range(n):
            u = upper[i]
            l = lower[i]
            if lower_sent[i]:
                val = _log_cdf(code, u)
            elif upper_sent[i]:
                val = _log_sf(code, l)
            elif u <= l:
                val = -INFINITY
            else:
                if u + l < 0.0:
                    a = _log_cdf(code, u)
                    b = _log_cdf(code, l)
                    d = b - a
                else:
                    a = _log_sf(code, l)
                    b = _log_sf(code, u)
                    d = b - a
                if d >= 0.0:
                    val = -INFINITY
                else:
                    val = a + log1p(-exp(d))
            lp[i] = val
            if isfinite(val):
                if not upper_sent[i]:
                    w = exp(_log_pdf(code, u) - val)
                    wu[i] = w if isfinite(w) else 0.0
                if not lower_sent[i]:
                    w = exp(_log_pdf(code, l) - val)
                    wl[i] = w if isfinite(w) else 0.0
    return lp_arr, wu_arr, wl_arr
