"""Model assessment: rootograms, randomized quantile residuals, proper scoring
rules, WAIC and k-fold cross-validation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtri

from .model import ModelDesign, build_design, predict_cdf_grid, predict_pmf_grid

TAIL_TOL = 1e-8


@dataclass
class Rootogram:
    values: np.ndarray  # 0..r_max
    observed: np.ndarray
    expected: np.ndarray

    @property
    def sqrt_observed(self):
        return np.sqrt(self.observed)

    @property
    def sqrt_expected(self):
        return np.sqrt(self.expected)


@dataclass
class ScoreReport:
    logarithmic: float
    brier: float
    spherical: float
    n: int
    per_fold: list = field(default_factory=list)
    waic: float | None = None
    lppd: float | None = None
    p_waic: float | None = None
    unseen_level_folds: list = field(default_factory=list)


def rootogram(design: ModelDesign, beta_draws, data, r_max: int | None = None) -> Rootogram:
    if design.spec.response_kind != "count":
        raise ValueError("rootograms are defined for count models only")
    y = np.asarray(data[design.spec.response_col]).astype(int)
    if r_max is None:
        r_max = int(y.max())
    pmf = predict_pmf_grid(design, beta_draws, data, y_grid=np.array([r_max]))
    observed = np.bincount(y, minlength=r_max + 1)[: r_max + 1].astype(float)
    expected = pmf[:, : r_max + 1].sum(axis=0)
    return Rootogram(values=np.arange(r_max + 1), observed=observed, expected=expected)


def quantile_residuals(design: ModelDesign, beta_draws, data, rng) -> np.ndarray:
    """Randomized quantile residuals: normal quantiles of uniforms drawn on
    (F(y-1), F(y)); standard normal under the true model."""
    spec = design.spec
    y = np.asarray(data[spec.response_col]).astype(int)
    if spec.response_kind == "ordinal":
        grid = np.arange(1, spec.n_categories)
        F = predict_cdf_grid(design, beta_draws, data, grid)
        F = np.column_stack([F, np.ones(F.shape[0])])  # reference category
        hi = F[np.arange(len(y)), y - 1]
        lo = np.where(y == 1, 0.0, F[np.arange(len(y)), np.maximum(y - 2, 0)])
    else:
        grid = np.arange(0, int(y.max()) + 1)
        F = predict_cdf_grid(design, beta_draws, data, grid)
        hi = F[np.arange(len(y)), y]
        lo = np.where(y == 0, 0.0, F[np.arange(len(y)), np.maximum(y - 1, 0)])
    width = np.maximum(hi - lo, 1e-12)
    u = lo + width * rng.random(len(y))
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return ndtri(u)


def scores(pmf_matrix: np.ndarray, observed_idx: np.ndarray) -> ScoreReport:
    """Brier, logarithmic and spherical score sums.

    `pmf_matrix` holds one predictive PMF per row; `observed_idx` is the
    column index of each observed outcome.
    """
    p = np.asarray(pmf_matrix, dtype=float)
    if np.any(p < 0.0):
        raise ValueError("predictive PMFs must be nonnegative")
    idx = np.asarray(observed_idx, dtype=int)
    rows = np.arange(len(idx))
    p_obs = p[rows, idx]
    one_hot = np.zeros_like(p)
    one_hot[rows, idx] = 1.0
    brier = float(-np.sum((one_hot - p) ** 2))
    with np.errstate(divide="ignore"):
        logarithmic = float(np.sum(np.log(p_obs)))
    norms = np.sqrt(np.sum(p * p, axis=1))
    spherical = float(np.sum(np.where(norms > 0.0, p_obs / np.maximum(norms, 1e-300), 0.0)))
    return ScoreReport(logarithmic=logarithmic, brier=brier, spherical=spherical, n=len(idx))


def count_support_cap(pmf_fn, max_observed: int) -> int:
    """Smallest support cap with posterior-mean tail mass below TAIL_TOL,
    never below max observed count + 10.  `pmf_fn(cap)` returns the (n, cap+1)
    PMF matrix up to `cap`."""
    cap = max_observed + 10
    prev_tail = np.inf
    while True:
        pmf = pmf_fn(cap)
        tail = float(np.max(1.0 - pmf.sum(axis=1)))
        if tail < TAIL_TOL or cap > max_observed + 10_000:
            return cap
        if tail > 0.99 * prev_tail:
            # the transformation saturates beyond the training range, so the
            # remaining tail mass cannot be resolved into further cells
            return cap
        prev_tail = tail
        cap *= 2


def score_fit(design: ModelDesign, beta_draws, data, unseen="error") -> ScoreReport:
    """Score a fitted model on (held-out) data with draw-averaged PMFs."""
    spec = design.spec
    y = np.asarray(data[spec.response_col]).astype(int)
    if spec.response_kind == "ordinal":
        pmf = predict_pmf_grid(design, beta_draws, data, unseen=unseen)
        idx = y - 1
    else:
        cap = count_support_cap(
            lambda c: predict_pmf_grid(design, beta_draws, data,
                                       y_grid=np.array([c]), unseen=unseen),
            int(y.max()),
        )
        pmf = predict_pmf_grid(design, beta_draws, data, y_grid=np.array([cap]), unseen=unseen)
        idx = y
    return scores(pmf, idx)


def waic(obs_logpmf_draws: np.ndarray):
    """WAIC from the (draws, n) matrix of per-observation log PMFs.

    Returns (waic, lppd, p_waic).
    """
    L = np.asarray(obs_logpmf_draws, dtype=float)
    if L.ndim != 2 or L.shape[0] < 2:
        raise ValueError("WAIC needs at least two draws")
    S = L.shape[0]
    lppd = float(np.sum(logsumexp(L, axis=0) - np.log(S)))
    p_waic = float(np.sum(np.var(L, axis=0, ddof=1)))
    return -2.0 * (lppd - p_waic), lppd, p_waic


def kfold_indices(n: int, k: int, rng) -> list:
    perm = rng.permutation(n)
    return [perm[i::k] for i in range(k)]


def kfold_cv(spec, data, config, k: int = 10, seed: int = 0) -> ScoreReport:
    """k-fold cross-validation: refit per fold, score the held-out fold with
    posterior-mean predictive PMFs.  Folds containing group levels unseen in
    their training part are scored with those effects at zero and flagged."""
    from .sampler import run_chain

    n = data.n if hasattr(data, "n") else len(data[spec.response_col])
    if n < k:
        raise ValueError("need at least k observations")
    rng = np.random.default_rng(seed)
    folds = kfold_indices(n, k, rng)
    seeds = np.random.SeedSequence(seed).spawn(k)

    total = ScoreReport(0.0, 0.0, 0.0, 0)
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        train = _subset(data, train_idx)
        test = _subset(data, test_idx)
        from dataclasses import replace

        fold_cfg = replace(config, seed=int(seeds[f].generate_state(1)[0]))
        design = build_design(spec, train)
        draws = run_chain(spec, train, fold_cfg, design=design)
        flagged = _has_unseen_levels(design, test)
        rep = score_fit(design, draws.beta, test, unseen="zero")
        total.logarithmic += rep.logarithmic
        total.brier += rep.brier
        total.spherical += rep.spherical
        total.n += rep.n
        total.per_fold.append(rep)
        if flagged:
            total.unseen_level_folds.append(f)
    return total


def _subset(data, idx):
    if hasattr(data, "subset"):
        return data.subset(idx)
    return {k: np.asarray(v)[idx] for k, v in data.items()}


def _has_unseen_levels(design: ModelDesign, data) -> bool:
    for blk in design.blocks:
        if blk.levels is not None:
            g = np.asarray(data[blk.term.columns[0]])
            if not np.all(np.isin(g, blk.levels)):
                return True
    return False
