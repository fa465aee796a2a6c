"""Shared helpers and fixtures for the test suite."""
import numpy as np
import pytest

from dctm.model import ModelSpec, TermSpec, build_design
from dctm.sampler import NutsConfig, run_chain


def finite_diff_grad(f, x, h=1e-6):
    """Central finite-difference gradient oracle."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def max_rel_err(a, b, floor=1.0):
    """Max |a-b| / max(|a|, |b|, floor) over entries."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))


def simulate_count_data(n, seed, overdispersed=True):
    """Simple count data with one uniform covariate."""
    rng = np.random.default_rng(seed)
    z = rng.random(n)
    mu = np.exp(1.0 + 0.7 * z)
    if overdispersed:
        size = 3.0
        y = rng.negative_binomial(size, size / (size + mu))
    else:
        y = rng.poisson(mu)
    return {"z": z, "y": y}


def simulate_ordinal_data(n, seed, probs=(0.2, 0.5, 0.3)):
    rng = np.random.default_rng(seed)
    cats = np.arange(1, len(probs) + 1)
    return {"y": rng.choice(cats, p=probs, size=n)}


@pytest.fixture(scope="session")
def small_count_fit():
    """A quick count-model fit shared by structural tests."""
    data = simulate_count_data(120, seed=7)
    spec = ModelSpec(
        "count", "y", "logit",
        [TermSpec("baseline_count", dimension=6), TermSpec("linear", columns=("z",))],
    )
    design = build_design(spec, data)
    cfg = NutsConfig(iterations=500, burnin=300, seed=42)
    draws = run_chain(spec, data, cfg, design=design)
    return spec, data, design, draws
