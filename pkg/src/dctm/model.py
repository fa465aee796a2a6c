"""Model specification and design assembly.

A model is a reference distribution plus an ordered list of partial
transformation terms.  Building the design against a dataset evaluates every
term's basis at the observed response and at its lag (previous integer for
counts, previous category for ordinal data), records sentinel rows whose CDF
is pinned at 0 or 1, and lays out the coefficient vector in blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import basis as bs
from . import penalty as pen
from .monotone import MonotoneMap, gamma_from_beta, grad_chain, overflows
from .refdist import ReferenceDistribution

TERM_KINDS = (
    "baseline_count",
    "baseline_ordinal",
    "linear",
    "smooth",
    "random",
    "tensor_smooth",
    "category_specific_smooth",
    "hurdle_zero",
)

DEFAULT_A = 1.0
DEFAULT_B = 0.001
DEFAULT_JITTER = 1e-6


class DataError(ValueError):
    pass


@dataclass
class TermSpec:
    kind: str
    name: str = ""
    columns: tuple = ()
    dimension: int = 8  # basis dimension in the term's smooth direction
    degree: int = 3
    response_transform: str = "log1p"
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    a2: float = DEFAULT_A
    b2: float = DEFAULT_B
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if not self.name:
            suffix = "_".join(str(c) for c in self.columns)
            self.name = self.kind + (f"_{suffix}" if suffix else "")
        self.columns = tuple(self.columns)


@dataclass
class ModelSpec:
    response_kind: str  # "count" or "ordinal"
    response_col: str
    reference: ReferenceDistribution
    terms: list
    n_categories: int | None = None  # c+1 for ordinal responses

    def __post_init__(self):
        if self.response_kind not in ("count", "ordinal"):
            raise ValueError(f"unknown response kind {self.response_kind!r}")
        if isinstance(self.reference, str):
            self.reference = ReferenceDistribution(self.reference)
        baseline = [t for t in self.terms if t.kind.startswith("baseline")]
        if len(baseline) != 1:
            raise ValueError("exactly one baseline term is required")
        if self.response_kind == "count":
            if baseline[0].kind != "baseline_count":
                raise ValueError("count models need a baseline_count term")
            bad = [t for t in self.terms if t.kind == "category_specific_smooth"]
            if bad:
                raise ValueError("category-specific terms need an ordinal response")
        else:
            if self.n_categories is None or self.n_categories < 2:
                raise ValueError("ordinal models need n_categories >= 2")
            if baseline[0].kind != "baseline_ordinal":
                raise ValueError("ordinal models need a baseline_ordinal term")
            if any(t.kind == "hurdle_zero" for t in self.terms):
                raise ValueError("hurdle terms only apply to count responses")
        if sum(t.kind == "hurdle_zero" for t in self.terms) > 1:
            raise ValueError("at most one hurdle term")


@dataclass
class PenaltyBlock:
    """Unit-scale prior precision of one coefficient block."""

    kind: str  # "single" or "aniso"
    a: float
    b: float
    K: np.ndarray | None = None  # single-direction precision
    rank: int = 0
    K1f: np.ndarray | None = None  # K1 kron I (anisotropic blocks)
    K2f: np.ndarray | None = None  # I kron K2
    grid: pen.AnisotropyGrid | None = None
    jitter: float = 0.0

    def precision(self, tau2: float, omega: float | None = None) -> np.ndarray:
        if tau2 <= 0.0:
            raise ValueError("smoothing variance must be positive")
        if self.kind == "single":
            K = self.K / tau2
        else:
            K = (omega * self.K1f + (1.0 - omega) * self.K2f) / tau2
        if self.jitter:
            K = K + self.jitter * np.eye(K.shape[0])
        return K


@dataclass
class DesignBlock:
    term: TermSpec
    offset: int
    size: int
    mono: MonotoneMap | None = None
    penalty: PenaltyBlock | None = None
    sign: float = 1.0
    zero_indicator: bool = False
    # trained evaluation state
    y_knots: bs.KnotVector | None = None
    x_knots: list = field(default_factory=list)
    x_offsets: np.ndarray | None = None
    col_means: np.ndarray | None = None
    col_sds: np.ndarray | None = None
    levels: list | None = None
    names: list = field(default_factory=list)

    @property
    def sl(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass
class ModelDesign:
    spec: ModelSpec
    n: int
    y: np.ndarray
    blocks: list
    Cu: np.ndarray  # design rows at the observed response
    Cl: np.ndarray  # design rows at the lagged response
    lower_sent: np.ndarray
    upper_sent: np.ndarray
    coef_names: list

    @property
    def dim(self) -> int:
        return self.Cu.shape[1]

    @property
    def penalized(self) -> list:
        return [blk for blk in self.blocks if blk.penalty is not None]

    @property
    def anisotropic(self) -> list:
        return [blk for blk in self.blocks if blk.penalty is not None and blk.penalty.kind == "aniso"]

    def gamma(self, beta: np.ndarray) -> np.ndarray:
        out = np.array(beta, dtype=float)
        for blk in self.blocks:
            if blk.mono is not None:
                out[blk.sl] = gamma_from_beta(beta[blk.sl], blk.mono)
        return out

    def overflow(self, beta: np.ndarray) -> bool:
        return any(
            blk.mono is not None and overflows(beta[blk.sl], blk.mono) for blk in self.blocks
        )

    def grad_to_beta(self, grad_gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
        out = np.array(grad_gamma, dtype=float)
        for blk in self.blocks:
            if blk.mono is not None:
                out[blk.sl] = grad_chain(grad_gamma[blk.sl], beta[blk.sl], blk.mono)
        return out


def pack(blocks_values) -> np.ndarray:
    return np.concatenate([np.ravel(v) for v in blocks_values])


def unpack(vector: np.ndarray, design: ModelDesign) -> list:
    return [np.asarray(vector)[blk.sl].copy() for blk in design.blocks]


# ---------------------------------------------------------------------------
# term construction


def _get_col(data, name):
    try:
        col = data[name] if not hasattr(data, "column") else data.column(name)
    except KeyError:
        raise DataError(f"column {name!r} not found") from None
    return np.asarray(col)


def _validate_count(y):
    y = np.asarray(y)
    yf = y.astype(float)
    if np.any(~np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.floor(yf)):
        raise DataError("count response must contain nonnegative integers")
    return yf.astype(int)


def _validate_ordinal(y, n_cat):
    y = np.asarray(y)
    yf = y.astype(float)
    if np.any(yf != np.floor(yf)) or np.any(yf < 1) or np.any(yf > n_cat):
        raise DataError(f"ordinal response must lie in 1..{n_cat}")
    return yf.astype(int)


def _fit_block(term: TermSpec, spec: ModelSpec, data, y, offset: int) -> DesignBlock:
    kind = term.kind
    c = (spec.n_categories - 1) if spec.n_categories else None
    if kind == "baseline_count":
        tf = bs.RESPONSE_TRANSFORMS[term.response_transform]
        # the likelihood differences the CDF at y and y-1, so the knot domain
        # must cover the lagged values as well
        support = np.concatenate([y, np.maximum(y - 1, 0)])
        kv = bs.make_knots(tf(support), term.dimension, term.degree)
        blk = DesignBlock(
            term,
            offset,
            term.dimension,
            mono=MonotoneMap(term.dimension, 1),
            penalty=PenaltyBlock(
                "single",
                term.a,
                term.b,
                K=pen.monotone_first_diff(term.dimension),
                rank=term.dimension - 2,
            ),
            y_knots=kv,
        )
    elif kind == "baseline_ordinal":
        blk = DesignBlock(term, offset, c, mono=MonotoneMap(c, 1))
    elif kind == "linear":
        X = np.column_stack([_get_col(data, col).astype(float) for col in term.columns])
        means = X.mean(axis=0)
        sds = X.std(axis=0)
        sds[sds == 0.0] = 1.0
        blk = DesignBlock(
            term, offset, X.shape[1], sign=-1.0, col_means=means, col_sds=sds
        )
    elif kind == "smooth":
        x = _get_col(data, term.columns[0]).astype(float)
        kv = bs.make_knots(x, term.dimension, term.degree)
        B = bs.eval_bspline(kv, x)
        _, offsets = bs.center(B)
        blk = DesignBlock(
            term,
            offset,
            term.dimension,
            sign=-1.0,
            penalty=PenaltyBlock(
                "single", term.a, term.b, K=pen.rw2_penalty(term.dimension), rank=term.dimension - 2
            ),
            x_knots=[kv],
            x_offsets=offsets,
        )
    elif kind == "random":
        g = _get_col(data, term.columns[0])
        levels = sorted(set(g.tolist()))
        blk = DesignBlock(
            term,
            offset,
            len(levels),
            sign=-1.0,
            penalty=PenaltyBlock(
                "single", term.a, term.b, K=pen.identity_penalty(len(levels)), rank=len(levels)
            ),
            levels=levels,
        )
    elif kind == "tensor_smooth":
        x1 = _get_col(data, term.columns[0]).astype(float)
        x2 = _get_col(data, term.columns[1]).astype(float)
        kv1 = bs.make_knots(x1, term.dimension, term.degree)
        kv2 = bs.make_knots(x2, term.dimension, term.degree)
        K1 = pen.rw2_penalty(term.dimension)
        K2 = pen.rw2_penalty(term.dimension)
        grid = pen.build_anisotropy_grid(K1, K2)
        d = term.dimension * term.dimension
        T = bs.tensor_rows(bs.eval_bspline(kv1, x1), bs.eval_bspline(kv2, x2))
        _, offsets = bs.center(T)
        blk = DesignBlock(
            term,
            offset,
            d,
            sign=-1.0,
            penalty=PenaltyBlock(
                "aniso",
                term.a,
                term.b,
                rank=int(grid.ranks[0]),
                K1f=np.kron(K1, np.eye(term.dimension)),
                K2f=np.kron(np.eye(term.dimension), K2),
                grid=grid,
            ),
            x_knots=[kv1, kv2],
            x_offsets=offsets,
        )
    elif kind == "category_specific_smooth":
        x = _get_col(data, term.columns[0]).astype(float)
        kv = bs.make_knots(x, term.dimension, term.degree)
        B = bs.eval_bspline(kv, x)
        _, offsets = bs.center(B)
        d = c * term.dimension
        K2 = pen.rw2_penalty(term.dimension)
        blk = DesignBlock(
            term,
            offset,
            d,
            mono=MonotoneMap(c, term.dimension),
            penalty=PenaltyBlock(
                "single",
                term.a,
                term.b,
                K=np.kron(np.eye(c), K2),
                rank=c * (term.dimension - 2),
                jitter=term.jitter,
            ),
            x_knots=[kv],
            x_offsets=offsets,
        )
    elif kind == "hurdle_zero":
        p = len(term.columns)
        if p:
            X = np.column_stack([_get_col(data, col).astype(float) for col in term.columns])
            means = X.mean(axis=0)
            sds = X.std(axis=0)
            sds[sds == 0.0] = 1.0
        else:
            means = sds = np.zeros(0)
        blk = DesignBlock(
            term,
            offset,
            p + 1,
            zero_indicator=True,
            col_means=np.asarray(means),
            col_sds=np.asarray(sds),
        )
    else:  # pragma: no cover
        raise AssertionError(kind)
    blk.names = [f"{term.name}[{i + 1}]" for i in range(blk.size)]
    if kind == "random":
        blk.names = [f"{term.name}[{lev}]" for lev in blk.levels]
    return blk


def _eval_block(blk: DesignBlock, spec: ModelSpec, data, y_vals, n: int, unseen="error") -> np.ndarray:
    """Evaluate one term's design rows.

    `y_vals` is the response value each row is evaluated at (observed or
    lagged); rows later masked by sentinels may carry arbitrary values.
    """
    term = blk.term
    kind = term.kind
    if kind == "baseline_count":
        tf = bs.RESPONSE_TRANSFORMS[term.response_transform]
        return bs.eval_bspline(blk.y_knots, tf(np.maximum(y_vals, 0)))
    if kind == "baseline_ordinal":
        c = spec.n_categories - 1
        r = np.clip(y_vals, 1, c + 1)
        return bs.eval_ordinal(r, c)
    if kind == "linear":
        X = np.column_stack([_get_col(data, col).astype(float) for col in term.columns])
        return blk.sign * (X - blk.col_means) / blk.col_sds
    if kind == "smooth":
        x = _get_col(data, term.columns[0]).astype(float)
        B, _ = bs.center(bs.eval_bspline(blk.x_knots[0], x), blk.x_offsets)
        return blk.sign * B
    if kind == "random":
        g = _get_col(data, term.columns[0])
        if unseen == "zero":
            known = np.isin(g, blk.levels)
            out = np.zeros((n, blk.size))
            if known.any():
                out[known] = bs.eval_group(g[known], blk.levels)
            return blk.sign * out
        return blk.sign * bs.eval_group(g, blk.levels)
    if kind == "tensor_smooth":
        x1 = _get_col(data, term.columns[0]).astype(float)
        x2 = _get_col(data, term.columns[1]).astype(float)
        T = bs.tensor_rows(
            bs.eval_bspline(blk.x_knots[0], x1), bs.eval_bspline(blk.x_knots[1], x2)
        )
        T, _ = bs.center(T, blk.x_offsets)
        return blk.sign * T
    if kind == "category_specific_smooth":
        c = spec.n_categories - 1
        r = np.clip(y_vals, 1, c + 1)
        A = bs.eval_ordinal(r, c)
        x = _get_col(data, term.columns[0]).astype(float)
        B, _ = bs.center(bs.eval_bspline(blk.x_knots[0], x), blk.x_offsets)
        return bs.tensor_rows(A, B)
    if kind == "hurdle_zero":
        ind = (np.asarray(y_vals) == 0).astype(float)
        cols = [np.ones(n)]
        if len(term.columns):
            X = np.column_stack([_get_col(data, col).astype(float) for col in term.columns])
            cols.append(-(X - blk.col_means) / blk.col_sds)
        M = np.column_stack(cols)
        return ind[:, None] * M
    raise AssertionError(kind)  # pragma: no cover


def build_design(spec: ModelSpec, data) -> ModelDesign:
    y_raw = _get_col(data, spec.response_col)
    if spec.response_kind == "count":
        y = _validate_count(y_raw)
        lower_sent = y == 0
        upper_sent = np.zeros(len(y), dtype=bool)
    else:
        y = _validate_ordinal(y_raw, spec.n_categories)
        lower_sent = y == 1
        upper_sent = y == spec.n_categories
    n = len(y)

    blocks = []
    offset = 0
    for term in spec.terms:
        blk = _fit_block(term, spec, data, y, offset)
        offset += blk.size
        blocks.append(blk)

    Cu = np.zeros((n, offset))
    Cl = np.zeros((n, offset))
    y_lag = y - 1
    for blk in blocks:
        Cu[:, blk.sl] = _eval_block(blk, spec, data, y, n)
        Cl[:, blk.sl] = _eval_block(blk, spec, data, y_lag, n)
    Cl[lower_sent] = 0.0
    Cu[upper_sent] = 0.0
    names = [nm for blk in blocks for nm in blk.names]
    return ModelDesign(
        spec=spec,
        n=n,
        y=y,
        blocks=blocks,
        Cu=np.ascontiguousarray(Cu),
        Cl=np.ascontiguousarray(Cl),
        lower_sent=lower_sent,
        upper_sent=upper_sent,
        coef_names=names,
    )


def assemble_precision(design: ModelDesign, tau2, omega) -> np.ndarray:
    """Block-diagonal prior precision at the given smoothing state.

    `tau2` is ordered like `design.penalized`; `omega` like `design.anisotropic`.
    """
    D = design.dim
    K = np.zeros((D, D))
    tau2 = np.atleast_1d(np.asarray(tau2, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float)) if omega is not None else np.zeros(0)
    it, io = 0, 0
    for blk in design.penalized:
        pb = blk.penalty
        if pb.kind == "aniso":
            K[blk.sl, blk.sl] = pb.precision(tau2[it], omega[io])
            io += 1
        else:
            K[blk.sl, blk.sl] = pb.precision(tau2[it])
        it += 1
    return K


# ---------------------------------------------------------------------------
# prediction


def h_grid(design: ModelDesign, gamma: np.ndarray, data, y_grid: np.ndarray, unseen="error") -> np.ndarray:
    """Transformation values h(y, x_i) for every row of `data` and every value
    of `y_grid` (integers for counts, categories 1..c for ordinal)."""
    spec = design.spec
    n = _infer_n_from(data, design)
    G = len(y_grid)
    H = np.zeros((n, G))
    for blk in design.blocks:
        g = np.asarray(gamma)[blk.sl]
        term = blk.term
        if term.kind in ("baseline_count", "baseline_ordinal", "category_specific_smooth"):
            A = _eval_y_grid(blk, spec, y_grid)
            if blk.mono is not None and blk.mono.d2 > 1:
                B = _x_part(blk, spec, data, n)
                H += B @ g.reshape(blk.mono.d1, blk.mono.d2).T @ A.T
            else:
                H += np.broadcast_to(A @ g, (n, G))
        elif term.kind == "hurdle_zero":
            v = _eval_block(blk, spec, data, np.zeros(n, dtype=int), n, unseen)
            H += (v @ g)[:, None] * (np.asarray(y_grid) == 0)[None, :]
        else:
            v = _eval_block(blk, spec, data, None, n, unseen) @ g
            H += v[:, None]
    return H


def _eval_y_grid(blk: DesignBlock, spec: ModelSpec, y_grid):
    term = blk.term
    if term.kind == "baseline_count":
        tf = bs.RESPONSE_TRANSFORMS[term.response_transform]
        return bs.eval_bspline(blk.y_knots, tf(np.asarray(y_grid)))
    c = spec.n_categories - 1
    return bs.eval_ordinal(np.asarray(y_grid), c)


def _x_part(blk: DesignBlock, spec: ModelSpec, data, n):
    x = _get_col(data, blk.term.columns[0]).astype(float)
    B, _ = bs.center(bs.eval_bspline(blk.x_knots[0], x), blk.x_offsets)
    return B


def predict_cdf_grid(design: ModelDesign, beta_draws, data, y_grid, unseen="error") -> np.ndarray:
    """Posterior-mean conditional CDF over `y_grid`, averaged across draws.

    `beta_draws` may be a single state (1-d) or a matrix of draws (S, D).
    """
    beta_draws = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    ref = design.spec.reference
    acc = None
    for beta in beta_draws:
        H = h_grid(design, design.gamma(beta), data, y_grid, unseen)
        F = ref.cdf(H)
        acc = F if acc is None else acc + F
    return acc / len(beta_draws)


def predict_pmf_grid(design: ModelDesign, beta_draws, data, y_grid=None, unseen="error") -> np.ndarray:
    """Posterior-mean PMF over the full support (ordinal) or 0..max(y_grid)."""
    spec = design.spec
    if spec.response_kind == "ordinal":
        c = spec.n_categories - 1
        F = predict_cdf_grid(design, beta_draws, data, np.arange(1, c + 1), unseen)
        P = np.empty((F.shape[0], c + 1))
        P[:, 0] = F[:, 0]
        P[:, 1:c] = np.diff(F, axis=1)
        P[:, c] = 1.0 - F[:, c - 1]
    else:
        grid = np.arange(0, int(np.max(y_grid)) + 1) if y_grid is not None else np.arange(0, 51)
        F = predict_cdf_grid(design, beta_draws, data, grid, unseen)
        P = np.empty_like(F)
        P[:, 0] = F[:, 0]
        P[:, 1:] = np.diff(F, axis=1)
    return np.maximum(P, 0.0)


def predict_cdf(design: ModelDesign, beta_draws, data, y, unseen="error") -> np.ndarray:
    """Conditional CDF at a single (possibly non-integer) response value."""
    spec = design.spec
    yf = int(np.floor(y))
    if spec.response_kind == "count" and yf < 0:
        return np.zeros(_infer_n_from(data, design))
    if spec.response_kind == "ordinal" and yf >= spec.n_categories:
        return np.ones(_infer_n_from(data, design))
    F = predict_cdf_grid(design, beta_draws, data, np.array([yf]), unseen)
    return F[:, 0]


def _infer_n_from(data, design):
    for term in design.spec.terms:
        if term.columns:
            return len(_get_col(data, term.columns[0]))
    try:
        return len(_get_col(data, design.spec.response_col))
    except DataError:
        # intercept-only model scored on covariate-free prediction rows:
        # any column determines the row count
        mapping = data.columns if hasattr(data, "columns") else data
        for name in mapping:
            return len(_get_col(data, name))
        raise
