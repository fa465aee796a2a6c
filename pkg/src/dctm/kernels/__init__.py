"""Kernel dispatch: compiled extension if built, numpy fallback otherwise.

Set DCTM_FORCE_PYTHON_KERNELS=1 to force the fallback (used by the parity
tests and the benchmark).
"""
from __future__ import annotations

import os

import numpy as np

from ._ref import CLOGLOG, LOGIT, PROBIT, pmf_terms as _pmf_terms_py

DIST_CODES = {"logit": LOGIT, "probit": PROBIT, "cloglog": CLOGLOG}

if os.environ.get("DCTM_FORCE_PYTHON_KERNELS") == "1":
    _impl = None
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = None

BACKEND = "compiled" if _impl is not None else "python"


def pmf_terms(code: int, upper, lower, lower_sent, upper_sent):
    """(logpmf, w_upper, w_lower) for each observation row; see _ref.pmf_terms."""
    if _impl is None:
        return _pmf_terms_py(code, upper, lower, lower_sent, upper_sent)
    return _impl.pmf_terms(
        code,
        np.ascontiguousarray(upper, dtype=np.float64),
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(lower_sent, dtype=np.uint8),
        np.ascontiguousarray(upper_sent, dtype=np.uint8),
    )


def pmf_terms_python(code: int, upper, lower, lower_sent, upper_sent):
    """Always the numpy implementation (benchmark/parity reference)."""
    return _pmf_terms_py(code, upper, lower, lower_sent, upper_sent)
