"""Transformation log-likelihood, log-posterior kernel and analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import DIST_CODES, pmf_terms
from .model import ModelDesign


@dataclass
class LogPosteriorEvaluation:
    value: float
    gradient: np.ndarray
    obs_logpmf: np.ndarray  # per-observation log PMF, retained for WAIC


def _terms(design: ModelDesign, beta: np.ndarray):
    gamma = design.gamma(beta)
    u = design.Cu @ gamma
    l = design.Cl @ gamma
    code = DIST_CODES[design.spec.reference.kind]
    return pmf_terms(code, u, l, design.lower_sent, design.upper_sent)


def obs_logpmf(design: ModelDesign, beta: np.ndarray) -> np.ndarray:
    """Per-observation log PMF contributions (may contain -inf)."""
    if design.overflow(beta):
        return np.full(design.n, -np.inf)
    return _terms(design, beta)[0]


def loglik(design: ModelDesign, beta: np.ndarray) -> float:
    lp = obs_logpmf(design, beta)
    return float(np.sum(lp)) if np.all(np.isfinite(lp)) else -np.inf


def grad_loglik(design: ModelDesign, beta: np.ndarray) -> np.ndarray:
    if design.overflow(beta):
        raise ValueError("gradient requested at a rejected (-inf) state")
    logpmf, wu, wl = _terms(design, beta)
    if not np.all(np.isfinite(logpmf)):
        raise ValueError("gradient requested at a rejected (-inf) state")
    grad_gamma = design.Cu.T @ wu - design.Cl.T @ wl
    return design.grad_to_beta(grad_gamma, beta)


def log_posterior(design: ModelDesign, beta: np.ndarray, K: np.ndarray) -> LogPosteriorEvaluation:
    """Unnormalized log posterior value l(beta) - 0.5 beta'K beta and gradient.

    Rejected states (overflow or non-positive cell probability) get value
    -inf and a zero gradient; the sampler treats them as divergent proposals.
    """
    D = design.dim
    if design.overflow(beta):
        return LogPosteriorEvaluation(-np.inf, np.zeros(D), np.full(design.n, -np.inf))
    logpmf, wu, wl = _terms(design, beta)
    if not np.all(np.isfinite(logpmf)):
        return LogPosteriorEvaluation(-np.inf, np.zeros(D), logpmf)
    grad_gamma = design.Cu.T @ wu - design.Cl.T @ wl
    grad = design.grad_to_beta(grad_gamma, beta)
    Kb = K @ beta
    value = float(np.sum(logpmf)) - 0.5 * float(beta @ Kb)
    return LogPosteriorEvaluation(value, grad - Kb, logpmf)


def make_logpost(design: ModelDesign, K: np.ndarray):
    """Closure (beta) -> LogPosteriorEvaluation bound to a fixed precision."""

    def f(beta):
        return log_posterior(design, beta, K)

    return f
