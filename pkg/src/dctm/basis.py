"""Basis function evaluation: B-splines, ordinal unit vectors, group indicators,
linear columns and Kronecker tensor rows, plus centering for identification.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

RESPONSE_TRANSFORMS = {
    "identity": lambda y: np.asarray(y, dtype=float),
    "log": lambda y: np.log(np.asarray(y, dtype=float)),
    "log1p": lambda y: np.log1p(np.asarray(y, dtype=float)),
}


class ExtrapolationWarning(UserWarning):
    """Raised when values outside the knot domain are clamped to its boundary."""


@dataclass(frozen=True)
class KnotVector:
    degree: int
    knots: np.ndarray  # full (clamped) knot sequence, nondecreasing
    lower: float
    upper: float

    @property
    def nbasis(self) -> int:
        return len(self.knots) - self.degree - 1


def make_knots(values, nbasis: int, degree: int = 3) -> KnotVector:
    """Clamped knot vector with equidistant interior knots over the data range."""
    if nbasis < degree + 1:
        raise ValueError(f"nbasis={nbasis} must be at least degree+1={degree + 1}")
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(values)), float(np.max(values))
    if not hi > lo:
        raise ValueError("cannot place knots on a degenerate (constant) range")
    n_interior = nbasis - degree - 1
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    return KnotVector(degree=degree, knots=knots, lower=lo, upper=hi)


def eval_bspline(kv: KnotVector, values) -> np.ndarray:
    """Dense (n, D) B-spline design matrix; out-of-domain values are clamped."""
    x = np.atleast_1d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("B-spline evaluated at non-finite value")
    n_out = int(np.sum((x < kv.lower) | (x > kv.upper)))
    if n_out:
        warnings.warn(
            f"{n_out} value(s) outside the knot domain "
            f"[{kv.lower:g}, {kv.upper:g}] clamped to the boundary",
            ExtrapolationWarning,
            stacklevel=2,
        )
        x = np.clip(x, kv.lower, kv.upper)
    return BSpline.design_matrix(x, kv.knots, kv.degree, extrapolate=False).toarray()


def eval_ordinal(r, c: int) -> np.ndarray:
    """Unit vector of length c for category r in 1..c; zeros for the reference
    category c+1 (its CDF is pinned to 1 by the likelihood)."""
    r = np.atleast_1d(np.asarray(r))
    if np.any(r < 1) or np.any(r > c + 1):
        raise IndexError(f"category index outside 1..{c + 1}")
    out = np.zeros((len(r), c))
    inside = r <= c
    out[np.flatnonzero(inside), r[inside] - 1] = 1.0
    return out


def eval_group(g, levels) -> np.ndarray:
    """Indicator rows of width len(levels); raises on labels not in `levels`."""
    g = np.atleast_1d(np.asarray(g))
    index = {lev: i for i, lev in enumerate(levels)}
    out = np.zeros((len(g), len(levels)))
    for row, label in enumerate(g):
        try:
            out[row, index[label]] = 1.0
        except KeyError:
            raise ValueError(f"unseen group level {label!r}") from None
    return out


def tensor_row(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product a (x) b with index d = (d1-1)*D2 + d2."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def tensor_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product of two (n, .) matrices -> (n, D1*D2)."""
    n = A.shape[0]
    return np.einsum("ij,ik->ijk", A, B).reshape(n, -1)


def center(matrix: np.ndarray, offsets: np.ndarray | None = None):
    """Subtract training column means; returns (centered, offsets).

    Pass stored training offsets to reproduce the centering on prediction rows.
    """
    matrix = np.asarray(matrix, dtype=float)
    if offsets is None:
        offsets = matrix.mean(axis=0)
    return matrix - offsets, np.asarray(offsets, dtype=float)
