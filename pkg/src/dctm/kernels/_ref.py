"""Pure-numpy implementation of the per-observation likelihood terms.

Used as the fallback when the compiled extension is unavailable and as the
parity reference in tests and benchmarks.
"""
from __future__ import annotations

import numpy as np
from scipy import special

LOGIT, PROBIT, CLOGLOG = 0, 1, 2

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _log_cdf(code, z):
    if code == LOGIT:
        return special.log_expit(z)
    if code == PROBIT:
        return special.log_ndtr(z)
    z = np.asarray(z, dtype=float)
    t = np.exp(z)
    small = t < 1e-8
    out = np.empty_like(t)
    out[small] = z[small] + np.log1p(-0.5 * t[small])
    out[~small] = np.log(np.maximum(-np.expm1(-t[~small]), 1e-300))
    return out


def _log_sf(code, z):
    if code == LOGIT:
        return special.log_expit(-z)
    if code == PROBIT:
        return special.log_ndtr(-z)
    return -np.exp(z)


def _log_pdf(code, z):
    if code == LOGIT:
        return special.log_expit(z) + special.log_expit(-z)
    if code == PROBIT:
        return -0.5 * z * z - _LOG_SQRT_2PI
    return z - np.exp(z)


def pmf_terms(code, upper, lower, lower_sent, upper_sent):
    """Per-observation log PMF and score weights.

    For each row the PMF is F(upper) - F(lower), with the sentinel flags
    replacing the corresponding CDF by 0 (lower) or 1 (upper).  Returns
    (logpmf, w_upper, w_lower) with w = f(argument) / pmf; weights on a
    sentinel side are zero.  Rows with non-positive pmf get logpmf = -inf
    and zero weights.
    """
    u = np.asarray(upper, dtype=float)
    l = np.asarray(lower, dtype=float)
    ls = np.asarray(lower_sent, dtype=bool)
    us = np.asarray(upper_sent, dtype=bool)
    n = len(u)
    logpmf = np.empty(n)
    wu = np.zeros(n)
    wl = np.zeros(n)

    both = ~ls & ~us
    # invalid rows: hurdle terms can break monotonicity between lag and
    # current rows; those states are rejected via -inf
    bad = both & (u <= l)
    ok = both & ~bad

    uo, lo = u[ok], l[ok]
    use_cdf = (uo + lo) < 0.0
    lp = np.empty(len(uo))
    with np.errstate(divide="ignore", invalid="ignore"):
        lfu = _log_cdf(code, uo[use_cdf])
        lfl = _log_cdf(code, lo[use_cdf])
        lp[use_cdf] = lfu + np.log1p(-np.exp(np.minimum(lfl - lfu, -1e-300)))
        lsu = _log_sf(code, uo[~use_cdf])
        lsl = _log_sf(code, lo[~use_cdf])
        lp[~use_cdf] = lsl + np.log1p(-np.exp(np.minimum(lsu - lsl, -1e-300)))
    logpmf[ok] = lp
    logpmf[bad] = -np.inf

    logpmf[ls] = _log_cdf(code, u[ls])
    logpmf[us] = _log_sf(code, l[us])

    finite = np.isfinite(logpmf)
    active_u = finite & ~us
    active_l = finite & ~ls
    with np.errstate(invalid="ignore"):
        wu[active_u] = np.exp(_log_pdf(code, u[active_u]) - logpmf[active_u])
        wl[active_l] = np.exp(_log_pdf(code, l[active_l]) - logpmf[active_l])
    wu[~np.isfinite(wu)] = 0.0
    wl[~np.isfinite(wl)] = 0.0
    return logpmf, wu, wl
