"""Monotone reparameterization of spline coefficients.

Coefficient blocks of a response-monotone term are stored unconstrained as
beta; the first row of the (D1, D2) grid is kept as-is and all later rows are
exponentiated, then cumulative sums along the response direction yield gamma.
Increasing B-spline coefficients imply an increasing spline, so the resulting
transformation is strictly increasing in the response at any covariate value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# exp(beta) overflows double precision well before this; states beyond the
# guard are rejected upstream with log-posterior -inf instead of crashing
EXP_GUARD = 700.0


@dataclass(frozen=True)
class MonotoneMap:
    d1: int  # response-direction basis dimension
    d2: int  # covariate-direction basis dimension (1 for pure response terms)

    @property
    def dim(self) -> int:
        return self.d1 * self.d2


def sigma_matrix(d1: int, d2: int) -> np.ndarray:
    """Dense cumulative-sum matrix (all-ones lower triangle kron identity).

    Only used as a test oracle; production code uses strided cumsums.
    """
    return np.kron(np.tril(np.ones((d1, d1))), np.eye(d2))


def overflows(beta_block: np.ndarray, m: MonotoneMap) -> bool:
    if m.d1 == 1:
        return False
    return bool(np.any(beta_block.reshape(m.d1, m.d2)[1:] > EXP_GUARD))


def beta_tilde(beta_block: np.ndarray, m: MonotoneMap) -> np.ndarray:
    v = np.asarray(beta_block, dtype=float).reshape(m.d1, m.d2).copy()
    if m.d1 > 1:
        v[1:] = np.exp(v[1:])
    return v.ravel()


def gamma_from_beta(beta_block: np.ndarray, m: MonotoneMap) -> np.ndarray:
    v = beta_tilde(beta_block, m).reshape(m.d1, m.d2)
    return np.cumsum(v, axis=0).ravel()


def jacobian_diag(beta_block: np.ndarray, m: MonotoneMap) -> np.ndarray:
    """Diagonal of d(beta_tilde)/d(beta): 1 on the first row, exp(beta) after."""
    v = np.asarray(beta_block, dtype=float).reshape(m.d1, m.d2)
    out = np.ones_like(v)
    if m.d1 > 1:
        out[1:] = np.exp(v[1:])
    return out.ravel()


def sigma_t_apply(vec: np.ndarray, m: MonotoneMap) -> np.ndarray:
    """Sigma^T v via reverse cumulative sums along the response direction."""
    v = np.asarray(vec, dtype=float).reshape(m.d1, m.d2)
    return np.cumsum(v[::-1], axis=0)[::-1].ravel()


def grad_chain(grad_gamma: np.ndarray, beta_block: np.ndarray, m: MonotoneMap) -> np.ndarray:
    """Map a gradient w.r.t. gamma to a gradient w.r.t. beta: C * Sigma^T * g."""
    return jacobian_diag(beta_block, m) * sigma_t_apply(grad_gamma, m)
