"""MCMC engine: NUTS updates of the full coefficient vector interleaved with
inverse-gamma Gibbs updates of the smoothing variances and discrete Gibbs
updates of the anisotropy weights."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .likelihood import LogPosteriorEvaluation, make_logpost
from .model import ModelDesign, assemble_precision, build_design
from .penalty import AnisotropyGrid

DIVERGENCE_THRESHOLD = 1000.0


@dataclass
class NutsConfig:
    iterations: int = 2000
    burnin: int = 1000
    warmup: int | None = None  # adaptation length; defaults to burnin
    target_accept: float = 0.8
    max_treedepth: int = 10
    da_gamma: float = 0.05
    da_t0: float = 10.0
    da_kappa: float = 0.75
    init_step_heuristic: bool = True
    step_size: float = 0.1  # used when the heuristic is disabled
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.warmup is None:
            self.warmup = self.burnin
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.burnin < self.warmup:
            raise ValueError("burnin must cover the warmup (adaptation) phase")
        if self.iterations <= self.burnin:
            raise ValueError("iterations must exceed burnin")


@dataclass
class PosteriorDraws:
    beta: np.ndarray  # (draws, D) retained post-burnin states
    tau2: np.ndarray  # (draws, n_penalized)
    omega: np.ndarray  # (draws, n_anisotropic)
    obs_logpmf: np.ndarray  # (draws, n)
    coef_names: list
    tau2_names: list
    omega_names: list
    stats: dict  # per-iteration arrays over the full run
    seed: int

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    @property
    def divergences(self) -> int:
        retained = self.stats["divergent"][-self.n_draws :]
        return int(np.sum(retained))


def _as_eval(res) -> LogPosteriorEvaluation:
    if isinstance(res, LogPosteriorEvaluation):
        return res
    value, grad = res
    return LogPosteriorEvaluation(float(value), np.asarray(grad, dtype=float), np.zeros(0))


# ---------------------------------------------------------------------------
# NUTS transition


class _Tree:
    __slots__ = (
        "theta_minus", "r_minus", "grad_minus",
        "theta_plus", "r_plus", "grad_plus",
        "proposal", "proposal_eval", "logw",
        "sum_alpha", "n_alpha", "turning", "diverging", "n_steps",
    )


def _leapfrog(theta, r, grad, eps, m_inv, logpost):
    r_half = r + 0.5 * eps * grad
    theta_new = theta + eps * m_inv * r_half
    ev = _as_eval(logpost(theta_new))
    r_new = r_half + 0.5 * eps * ev.gradient
    return theta_new, r_new, ev


def _kinetic(r, m_inv):
    return 0.5 * float(np.dot(r * r, m_inv))


def _is_turning(theta_minus, theta_plus, r_minus, r_plus, m_inv):
    d = theta_plus - theta_minus
    return (np.dot(d, m_inv * r_minus) < 0.0) or (np.dot(d, m_inv * r_plus) < 0.0)


def _build_tree(theta, r, grad, depth, direction, eps, m_inv, logpost, w0, rng):
    tree = _Tree()
    if depth == 0:
        theta_new, r_new, ev = _leapfrog(theta, r, grad, direction * eps, m_inv, logpost)
        w = ev.value - _kinetic(r_new, m_inv) if np.isfinite(ev.value) else -np.inf
        energy_error = w0 - w
        tree.diverging = (not np.isfinite(w)) or energy_error > DIVERGENCE_THRESHOLD
        tree.turning = False
        tree.theta_minus = tree.theta_plus = theta_new
        tree.r_minus = tree.r_plus = r_new
        tree.grad_minus = tree.grad_plus = ev.gradient
        tree.proposal = theta_new
        tree.proposal_eval = ev
        tree.logw = w - w0
        tree.sum_alpha = np.exp(min(w - w0, 0.0)) if np.isfinite(w) else 0.0
        tree.n_alpha = 1
        tree.n_steps = 1
        return tree

    first = _build_tree(theta, r, grad, depth - 1, direction, eps, m_inv, logpost, w0, rng)
    if first.diverging or first.turning:
        return first
    if direction == 1:
        theta_e, r_e, grad_e = first.theta_plus, first.r_plus, first.grad_plus
    else:
        theta_e, r_e, grad_e = first.theta_minus, first.r_minus, first.grad_minus
    second = _build_tree(theta_e, r_e, grad_e, depth - 1, direction, eps, m_inv, logpost, w0, rng)

    tree.sum_alpha = first.sum_alpha + second.sum_alpha
    tree.n_alpha = first.n_alpha + second.n_alpha
    tree.n_steps = first.n_steps + second.n_steps
    tree.diverging = second.diverging
    logw = np.logaddexp(first.logw, second.logw)
    # multinomial selection among the two halves
    if np.isfinite(second.logw) and np.log(rng.random()) < second.logw - logw:
        tree.proposal, tree.proposal_eval = second.proposal, second.proposal_eval
    else:
        tree.proposal, tree.proposal_eval = first.proposal, first.proposal_eval
    tree.logw = logw
    if direction == 1:
        tree.theta_minus, tree.r_minus, tree.grad_minus = (
            first.theta_minus, first.r_minus, first.grad_minus)
        tree.theta_plus, tree.r_plus, tree.grad_plus = (
            second.theta_plus, second.r_plus, second.grad_plus)
    else:
        tree.theta_minus, tree.r_minus, tree.grad_minus = (
            second.theta_minus, second.r_minus, second.grad_minus)
        tree.theta_plus, tree.r_plus, tree.grad_plus = (
            first.theta_plus, first.r_plus, first.grad_plus)
    tree.turning = second.turning or _is_turning(
        tree.theta_minus, tree.theta_plus, tree.r_minus, tree.r_plus, m_inv)
    return tree


def nuts_transition(theta, current_eval, logpost, m_inv, eps, max_treedepth, rng):
    """One NUTS trajectory; returns (theta, eval, stats)."""
    if not np.isfinite(current_eval.value):
        raise ValueError("NUTS started from a state with non-finite log posterior")
    r0 = rng.standard_normal(len(theta)) / np.sqrt(m_inv)
    w0 = current_eval.value - _kinetic(r0, m_inv)

    theta_minus = theta_plus = theta
    r_minus = r_plus = r0
    grad_minus = grad_plus = current_eval.gradient
    proposal, proposal_eval = theta, current_eval
    logw = 0.0  # weight of the initial point relative to w0
    sum_alpha, n_alpha, n_steps = 0.0, 0, 0
    divergent = False
    depth = 0
    while depth < max_treedepth:
        direction = 1 if rng.random() < 0.5 else -1
        if direction == 1:
            sub = _build_tree(theta_plus, r_plus, grad_plus, depth, 1,
                              eps, m_inv, logpost, w0, rng)
            theta_plus, r_plus, grad_plus = sub.theta_plus, sub.r_plus, sub.grad_plus
        else:
            sub = _build_tree(theta_minus, r_minus, grad_minus, depth, -1,
                              eps, m_inv, logpost, w0, rng)
            theta_minus, r_minus, grad_minus = sub.theta_minus, sub.r_minus, sub.grad_minus
        sum_alpha += sub.sum_alpha
        n_alpha += sub.n_alpha
        n_steps += sub.n_steps
        if sub.diverging:
            divergent = True
            break
        if sub.turning:
            depth += 1
            break
        # biased progressive sampling favours the new subtree
        if np.isfinite(sub.logw) and np.log(rng.random()) < sub.logw - logw:
            proposal, proposal_eval = sub.proposal, sub.proposal_eval
        logw = np.logaddexp(logw, sub.logw)
        depth += 1
        if _is_turning(theta_minus, theta_plus, r_minus, r_plus, m_inv):
            break
    stats = {
        "accept_stat": sum_alpha / max(n_alpha, 1),
        "tree_depth": depth,
        "divergent": divergent,
        "n_steps": n_steps,
    }
    return proposal, proposal_eval, stats


def find_reasonable_epsilon(theta, current_eval, logpost, m_inv, rng):
    """Doubling/halving heuristic targeting ~50% acceptance for one step."""
    eps = 1.0
    r = rng.standard_normal(len(theta)) / np.sqrt(m_inv)
    w0 = current_eval.value - _kinetic(r, m_inv)

    def joint(e):
        _, r_new, ev = _leapfrog(theta, r, current_eval.gradient, e, m_inv, logpost)
        if not np.isfinite(ev.value):
            return -np.inf
        return ev.value - _kinetic(r_new, m_inv)

    logp_ratio = joint(eps) - w0
    direction = 1.0 if logp_ratio > np.log(0.5) else -1.0
    for _ in range(100):
        eps_new = eps * 2.0 ** direction
        logp_ratio = joint(eps_new) - w0
        if direction == 1.0 and logp_ratio <= np.log(0.5):
            break
        if direction == -1.0 and logp_ratio >= np.log(0.5):
            eps = eps_new
            break
        eps = eps_new
        if eps < 1e-10 or eps > 1e7:
            break
    return eps


# ---------------------------------------------------------------------------
# dual averaging and mass adaptation


@dataclass
class DualAveraging:
    target: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    mu: float = 0.0
    log_eps: float = 0.0
    log_eps_bar: float = 0.0
    h_bar: float = 0.0
    t: int = 0

    @classmethod
    def start(cls, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        return cls(target=target, gamma=gamma, t0=t0, kappa=kappa,
                   mu=np.log(10.0 * eps0), log_eps=np.log(eps0))

    def update(self, accept_stat: float) -> float:
        self.t += 1
        frac = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_eps = self.mu - np.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return float(np.exp(self.log_eps))

    @property
    def averaged(self) -> float:
        return float(np.exp(self.log_eps_bar))


def adapt_mass(window_draws: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """Diagonal inverse mass: window variances shrunk 5% toward unit."""
    window_draws = np.asarray(window_draws, dtype=float)
    if window_draws.shape[0] < 50:
        return previous.copy()
    var = window_draws.var(axis=0)
    out = 0.95 * var + 0.05
    out[var == 0.0] = previous[var == 0.0]
    return out


def warmup_windows(warmup: int, init_fast: int = 75, term_fast: int = 50, base_slow: int = 25):
    """Boundaries (end iterations) of the slow mass-adaptation windows."""
    if warmup < init_fast + term_fast + base_slow:
        scale = warmup / float(init_fast + term_fast + base_slow)
        init_fast = max(int(init_fast * scale), 1)
        term_fast = max(int(term_fast * scale), 1)
    boundaries = []
    start = init_fast
    size = base_slow
    while start + size < warmup - term_fast:
        if start + 3 * size >= warmup - term_fast:
            size = warmup - term_fast - start  # extend the last window
        boundaries.append((start, start + size))
        start += size
        size *= 2
    return boundaries


# ---------------------------------------------------------------------------
# generic NUTS driver (used by tests and by run_chain)


def sample_nuts(logpost, theta0, config: NutsConfig, rng=None):
    """Run adaptive NUTS on an arbitrary differentiable log density.

    Returns (draws, stats) with `draws` the post-burnin states.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    theta = np.asarray(theta0, dtype=float)
    ev = _as_eval(logpost(theta))
    if not np.isfinite(ev.value):
        raise ValueError("non-finite log posterior at the initial state")
    m_inv = np.ones(len(theta))
    eps = (find_reasonable_epsilon(theta, ev, logpost, m_inv, rng)
           if config.init_step_heuristic else config.step_size)
    da = DualAveraging.start(eps, config.target_accept,
                             config.da_gamma, config.da_t0, config.da_kappa)
    windows = warmup_windows(config.warmup)
    window_iter = 0
    window_buf = []

    retained = []
    stats = {k: [] for k in ("accept_stat", "tree_depth", "divergent", "n_steps", "step_size")}
    for it in range(config.iterations):
        theta, ev, st = nuts_transition(theta, ev, logpost, m_inv, eps,
                                        config.max_treedepth, rng)
        for k in ("accept_stat", "tree_depth", "divergent", "n_steps"):
            stats[k].append(st[k])
        stats["step_size"].append(eps)
        if it < config.warmup:
            eps = da.update(st["accept_stat"])
            if window_iter < len(windows):
                lo, hi = windows[window_iter]
                if lo <= it < hi:
                    window_buf.append(theta.copy())
                if it == hi - 1:
                    m_inv = adapt_mass(np.asarray(window_buf), m_inv)
                    window_buf = []
                    window_iter += 1
                    eps = find_reasonable_epsilon(theta, ev, logpost, m_inv, rng)
                    da = DualAveraging.start(eps, config.target_accept,
                                             config.da_gamma, config.da_t0, config.da_kappa)
        elif it == config.warmup:
            eps = da.averaged
        if it >= config.burnin:
            retained.append(theta.copy())
    if config.warmup == config.iterations:  # pragma: no cover
        eps = da.averaged
    stats = {k: np.asarray(v) for k, v in stats.items()}
    return np.asarray(retained), stats


# ---------------------------------------------------------------------------
# Gibbs updates


def gibbs_tau2(beta_block, K, rank, a, b, rng) -> float:
    """Exact inverse-gamma draw from the smoothing-variance full conditional."""
    quad = float(beta_block @ K @ beta_block)
    shape = a + 0.5 * rank
    rate = b + 0.5 * max(quad, 0.0)
    return float(rate / rng.gamma(shape))


def gibbs_omega(beta_block, tau2, grid: AnisotropyGrid, K1f, K2f, rng) -> float:
    """Categorical draw of the anisotropy weight over the precomputed grid."""
    q1 = float(beta_block @ K1f @ beta_block)
    q2 = float(beta_block @ K2f @ beta_block)
    logw = (0.5 * grid.log_gdets
            - (grid.omegas * q1 + (1.0 - grid.omegas) * q2) / (2.0 * tau2)
            + grid.log_prior)
    logw = logw - np.max(logw)
    p = np.exp(logw)
    p /= p.sum()
    idx = int(np.searchsorted(np.cumsum(p), rng.random()))
    idx = min(idx, len(p) - 1)
    return float(grid.omegas[idx])


# ---------------------------------------------------------------------------
# full model chain


def _init_state(design: ModelDesign, K, rng, attempts=100):
    D = design.dim
    logpost = make_logpost(design, K)
    for _ in range(attempts):
        beta = 0.1 * rng.standard_normal(D)
        ev = logpost(beta)
        if np.isfinite(ev.value):
            return beta, ev
    raise RuntimeError("failed to find a finite-posterior initialization "
                       f"after {attempts} jittered attempts")


def run_chain(spec, data, config: NutsConfig, design: ModelDesign | None = None,
              rng=None) -> PosteriorDraws:
    """One full chain: per iteration a NUTS update of all coefficients, then
    Gibbs sweeps over the smoothing variances and the anisotropy weights."""
    if design is None:
        design = build_design(spec, data)
    rng = np.random.default_rng(config.seed) if rng is None else rng

    pen_blocks = design.penalized
    aniso_blocks = design.anisotropic
    tau2 = np.ones(len(pen_blocks))
    omega = np.array([blk.penalty.grid.midpoint for blk in aniso_blocks])

    K = assemble_precision(design, tau2, omega)
    beta, ev = _init_state(design, K, rng)
    logpost = make_logpost(design, K)

    m_inv = np.ones(design.dim)
    eps = (find_reasonable_epsilon(beta, ev, logpost, m_inv, rng)
           if config.init_step_heuristic else config.step_size)
    da = DualAveraging.start(eps, config.target_accept,
                             config.da_gamma, config.da_t0, config.da_kappa)
    windows = warmup_windows(config.warmup)
    window_iter = 0
    window_buf = []

    n_keep = config.iterations - config.burnin
    keep_beta = np.empty((n_keep, design.dim))
    keep_tau2 = np.empty((n_keep, len(pen_blocks)))
    keep_omega = np.empty((n_keep, len(aniso_blocks)))
    keep_logpmf = np.empty((n_keep, design.n))
    stats = {k: [] for k in ("accept_stat", "tree_depth", "divergent", "n_steps", "step_size")}

    kept = 0
    for it in range(config.iterations):
        beta, ev, st = nuts_transition(beta, ev, logpost, m_inv, eps,
                                       config.max_treedepth, rng)
        for k in ("accept_stat", "tree_depth", "divergent", "n_steps"):
            stats[k].append(st[k])
        stats["step_size"].append(eps)

        # Gibbs sweep: smoothing variances, then anisotropy weights
        io = 0
        for i, blk in enumerate(pen_blocks):
            pb = blk.penalty
            bb = beta[blk.sl]
            if pb.kind == "aniso":
                Kb = omega[io] * pb.K1f + (1.0 - omega[io]) * pb.K2f
                tau2[i] = gibbs_tau2(bb, Kb, pb.rank, pb.a, pb.b, rng)
                omega[io] = gibbs_omega(bb, tau2[i], pb.grid, pb.K1f, pb.K2f, rng)
                io += 1
            else:
                tau2[i] = gibbs_tau2(bb, pb.K, pb.rank, pb.a, pb.b, rng)
        K = assemble_precision(design, tau2, omega)
        logpost = make_logpost(design, K)
        ev = logpost(beta)  # refresh under the new precision

        if it < config.warmup:
            eps = da.update(st["accept_stat"])
            if window_iter < len(windows):
                lo, hi = windows[window_iter]
                if lo <= it < hi:
                    window_buf.append(beta.copy())
                if it == hi - 1:
                    m_inv = adapt_mass(np.asarray(window_buf), m_inv)
                    window_buf = []
                    window_iter += 1
                    eps = find_reasonable_epsilon(beta, ev, logpost, m_inv, rng)
                    da = DualAveraging.start(eps, config.target_accept,
                                             config.da_gamma, config.da_t0, config.da_kappa)
        elif it == config.warmup:
            eps = da.averaged
        if it >= config.burnin:
            keep_beta[kept] = beta
            keep_tau2[kept] = tau2
            keep_omega[kept] = omega
            keep_logpmf[kept] = ev.obs_logpmf
            kept += 1

    tau2_names = [f"tau2_{blk.term.name}" for blk in pen_blocks]
    omega_names = [f"omega_{blk.term.name}" for blk in aniso_blocks]
    return PosteriorDraws(
        beta=keep_beta,
        tau2=keep_tau2,
        omega=keep_omega,
        obs_logpmf=keep_logpmf,
        coef_names=design.coef_names,
        tau2_names=tau2_names,
        omega_names=omega_names,
        stats={k: np.asarray(v) for k, v in stats.items()},
        seed=config.seed,
    )


def run_chains(spec, data, config: NutsConfig, design: ModelDesign | None = None):
    """Independent chains with seeds split from the master seed."""
    from dataclasses import replace

    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    out = []
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        chain_cfg = replace(config, chains=1)
        out.append(run_chain(spec, data, chain_cfg, design=design, rng=rng))
    return out
