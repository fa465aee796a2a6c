import numpy as np
import pytest

from dctm.likelihood import grad_loglik, log_posterior, loglik, make_logpost, obs_logpmf
from dctm.model import ModelSpec, TermSpec, build_design
from dctm.refdist import ReferenceDistribution

from conftest import finite_diff_grad, max_rel_err


def _archetypes(n=40, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.random(n)
    w = rng.random(n)
    y_count = rng.poisson(np.exp(1.0 + z))
    y_ord = rng.integers(1, 5, n)
    count_data = {"y": y_count, "z": z}
    ord_data = {"y": y_ord, "z": z, "w": w}
    shift = ModelSpec("count", "y", "logit",
                      [TermSpec("baseline_count", dimension=6),
                       TermSpec("linear", columns=("z",))])
    hurdle = ModelSpec("count", "y", "probit",
                       [TermSpec("baseline_count", dimension=6),
                        TermSpec("linear", columns=("z",)),
                        TermSpec("hurdle_zero", columns=("z",))])
    prop = ModelSpec("ordinal", "y", "cloglog",
                     [TermSpec("baseline_ordinal"),
                      TermSpec("linear", columns=("z",))], n_categories=4)
    nonprop = ModelSpec("ordinal", "y", "logit",
                        [TermSpec("baseline_ordinal"),
                         TermSpec("linear", columns=("z",)),
                         TermSpec("category_specific_smooth", columns=("w",), dimension=4),
                         TermSpec("tensor_smooth", columns=("z", "w"), dimension=4)],
                        n_categories=4)
    return [
        ("shift-count", build_design(shift, count_data)),
        ("hurdle-count", build_design(hurdle, count_data)),
        ("proportional-ordinal", build_design(prop, ord_data)),
        ("nonproportional-ordinal", build_design(nonprop, ord_data)),
    ]


@pytest.mark.parametrize("name,design", _archetypes(), ids=lambda v: v if isinstance(v, str) else "")
def test_gradient_matches_finite_differences(name, design):
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 10:
        beta = rng.normal(scale=0.3, size=design.dim)
        if not np.isfinite(loglik(design, beta)):
            continue
        fd = finite_diff_grad(lambda b: loglik(design, b), beta, h=1e-6)
        assert max_rel_err(grad_loglik(design, beta), fd) < 1e-6
        checked += 1


def test_count_zero_cell_value():
    # h(0) = 0 under the logistic reference gives log F(0) = log(1/2)
    data = {"y": np.array([0])}
    design = build_design(
        ModelSpec("count", "y", "logit", [TermSpec("baseline_count", dimension=6)]),
        {"y": np.arange(0, 8)})
    beta = np.array([0.0, -2.0, 0.0, 0.0, 0.0, 0.0])
    lp = obs_logpmf(design, beta)
    assert lp[0] == pytest.approx(np.log(0.5), rel=1e-14)


def test_ordinal_uniform_thresholds():
    ref = ReferenceDistribution("logit")
    data = {"y": np.array([1, 2, 3])}
    design = build_design(
        ModelSpec("ordinal", "y", "logit", [TermSpec("baseline_ordinal")], n_categories=3),
        data)
    # beta -> gamma = (F^-1(1/3), F^-1(2/3)) via the monotone map
    g1, g2 = ref.quantile(1 / 3), ref.quantile(2 / 3)
    beta = np.array([g1, np.log(g2 - g1)])
    lp = obs_logpmf(design, beta)
    assert np.allclose(lp, np.log(1 / 3), atol=1e-12)
    # upper-sentinel cell with threshold h = 0: PMF = 1 - F(0) = 1/2
    beta0 = np.array([-5.0, np.log(5.0)])  # thresholds (-5, 0)
    assert obs_logpmf(design, beta0)[2] == pytest.approx(np.log(0.5), rel=1e-12)


def test_saturated_ordinal_loglik():
    rng = np.random.default_rng(1)
    y = rng.choice([1, 2, 3], p=[0.25, 0.45, 0.3], size=400)
    data = {"y": y}
    design = build_design(
        ModelSpec("ordinal", "y", "probit", [TermSpec("baseline_ordinal")], n_categories=3),
        data)
    ref = ReferenceDistribution("probit")
    phat = np.bincount(y, minlength=4)[1:] / len(y)
    cum = np.cumsum(phat)
    g = ref.quantile(cum[:2])
    beta = np.array([g[0], np.log(g[1] - g[0])])
    want = len(y) * float(np.sum(phat * np.log(phat)))
    assert loglik(design, beta) == pytest.approx(want, rel=1e-12)


def test_loglik_additive_and_exchangeable():
    rng = np.random.default_rng(2)
    data = {"y": rng.poisson(3.0, 30), "z": rng.random(30)}
    spec = ModelSpec("count", "y", "logit",
                     [TermSpec("baseline_count", dimension=5),
                      TermSpec("linear", columns=("z",))])
    design = build_design(spec, data)
    beta = 0.2 * rng.normal(size=design.dim)
    total = loglik(design, beta)
    assert total == pytest.approx(float(np.sum(obs_logpmf(design, beta))), rel=1e-14)
    perm = rng.permutation(30)
    design_p = build_design(spec, {k: v[perm] for k, v in data.items()})
    # identical marginal data: same basis layout, permuted rows, equal sum
    assert loglik(design_p, beta) == pytest.approx(total, rel=1e-12)


def test_log_posterior_prior_term():
    rng = np.random.default_rng(3)
    data = {"y": rng.poisson(2.0, 25)}
    design = build_design(
        ModelSpec("count", "y", "logit", [TermSpec("baseline_count", dimension=5)]), data)
    beta = 0.3 * rng.normal(size=design.dim)
    K0 = np.zeros((design.dim, design.dim))
    ev = log_posterior(design, beta, K0)
    assert ev.value == pytest.approx(loglik(design, beta), rel=1e-14)
    assert np.allclose(ev.gradient, grad_loglik(design, beta))
    K = np.eye(design.dim) * 2.0
    ev2 = log_posterior(design, beta, K)
    assert ev2.value == pytest.approx(ev.value - beta @ K @ beta / 2, rel=1e-12)
    assert np.allclose(ev2.gradient, ev.gradient - K @ beta)
    ev0 = log_posterior(design, np.zeros(design.dim), K)
    assert ev0.value == pytest.approx(loglik(design, np.zeros(design.dim)), rel=1e-14)


def test_overflow_state_rejected():
    data = {"y": np.arange(0, 10)}
    design = build_design(
        ModelSpec("count", "y", "logit", [TermSpec("baseline_count", dimension=5)]), data)
    beta = np.array([0.0, 800.0, 0.0, 0.0, 0.0])
    assert loglik(design, beta) == -np.inf
    ev = log_posterior(design, beta, np.zeros((5, 5)))
    assert ev.value == -np.inf
    assert np.all(ev.gradient == 0.0)
    with pytest.raises(ValueError):
        grad_loglik(design, beta)


def test_hurdle_invalid_cell_rejected():
    # a hurdle coefficient large enough to break monotonicity between the
    # lagged zero-indicator row and the current row yields -inf, never NaN
    data = {"y": np.array([1, 1, 2]), "z": np.array([0.2, 0.8, 0.5])}
    spec = ModelSpec("count", "y", "logit",
                     [TermSpec("baseline_count", dimension=5),
                      TermSpec("hurdle_zero")])
    design = build_design(spec, data)
    beta = np.zeros(design.dim)
    beta[-1] = 50.0  # huge excess-zero shift
    ev = log_posterior(design, beta, np.zeros((design.dim, design.dim)))
    assert ev.value == -np.inf
    assert not np.any(np.isnan(ev.obs_logpmf))


def test_make_logpost_closure():
    rng = np.random.default_rng(4)
    data = {"y": rng.poisson(2.0, 20)}
    design = build_design(
        ModelSpec("count", "y", "logit", [TermSpec("baseline_count", dimension=5)]), data)
    K = np.eye(design.dim)
    f = make_logpost(design, K)
    beta = 0.1 * rng.normal(size=design.dim)
    ev = f(beta)
    want = log_posterior(design, beta, K)
    assert ev.value == want.value
    assert np.array_equal(ev.gradient, want.gradient)
