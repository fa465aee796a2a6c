"""Command-line interface: fit, predict, score, diagnose, simulate.

Fits are persisted as three artifacts in the output directory: draws.csv
(one row per retained draw), summary.json (posterior summaries, WAIC,
divergence count) and manifest.json (hashes of the config and data files,
seed, version, timing).  Prediction and diagnosis rebuild the trained design
deterministically from the manifest's config and training data, so those
files must still match their recorded hashes.
"""
from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, diagnostics, simstudy
from .data import Dataset, IngestError, ingest_csv
from .model import DataError, ModelSpec, TermSpec, build_design, predict_pmf_grid, predict_cdf_grid
from .sampler import NutsConfig, run_chains

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SAMPLER = 4


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# config parsing


def parse_model_config(cfg: dict):
    """Returns (ModelSpec, data schema dict, NutsConfig)."""
    try:
        resp = cfg["response"]
        kind = resp["kind"]
        column = resp["column"]
        reference = resp.get("reference", "logit")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"response section: missing {exc}") from exc
    if kind not in ("count", "ordinal"):
        raise ConfigError(f"response.kind: unknown value {kind!r}")

    schema = dict(cfg.get("columns", {}))
    n_categories = None
    if kind == "ordinal":
        levels = resp.get("categories")
        if not levels or len(levels) < 2:
            raise ConfigError("response.categories: ordinal models need >= 2 declared levels")
        n_categories = len(levels)
        schema[column] = "ordinal-category"
        schema.setdefault("ordinal_levels", {})[column] = list(levels)
    else:
        schema[column] = "integer-count"

    terms = []
    for i, rec in enumerate(cfg.get("terms", [])):
        try:
            term = TermSpec(
                kind=rec["kind"],
                name=rec.get("name", ""),
                columns=tuple(rec.get("columns", ())),
                dimension=int(rec.get("dimension", 8)),
                degree=int(rec.get("degree", 3)),
                response_transform=rec.get("response_transform", "log1p"),
                a=float(rec.get("a", 1.0)),
                b=float(rec.get("b", 0.001)),
                jitter=float(rec.get("jitter", 1e-6)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"terms[{i}]: {exc}") from exc
        terms.append(term)

    try:
        spec = ModelSpec(kind, column, reference, terms, n_categories=n_categories)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    s = cfg.get("sampler", {})
    try:
        nuts = NutsConfig(
            iterations=int(s.get("iterations", 2000)),
            burnin=int(s.get("burnin", 1000)),
            warmup=int(s["warmup"]) if "warmup" in s else None,
            target_accept=float(s.get("target_accept", 0.8)),
            max_treedepth=int(s.get("max_treedepth", 10)),
            seed=int(s.get("seed", 0)),
            chains=int(s.get("chains", 1)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"sampler section: {exc}") from exc
    return spec, schema, nuts


def _load_data(path, schema) -> Dataset:
    return ingest_csv(path, schema)


# ---------------------------------------------------------------------------
# draw serialization


def _original_scale(design, beta: np.ndarray) -> np.ndarray:
    """Linear and hurdle covariate coefficients divided by the training sds."""
    out = beta.copy()
    for blk in design.blocks:
        if blk.term.kind == "linear":
            out[:, blk.sl] = beta[:, blk.sl] / blk.col_sds
        elif blk.term.kind == "hurdle_zero" and blk.size > 1:
            sub = slice(blk.offset + 1, blk.offset + blk.size)
            out[:, sub] = beta[:, sub] / blk.col_sds
    return out


def _internal_scale(design, beta: np.ndarray) -> np.ndarray:
    out = beta.copy()
    for blk in design.blocks:
        if blk.term.kind == "linear":
            out[:, blk.sl] = beta[:, blk.sl] * blk.col_sds
        elif blk.term.kind == "hurdle_zero" and blk.size > 1:
            sub = slice(blk.offset + 1, blk.offset + blk.size)
            out[:, sub] = beta[:, sub] * blk.col_sds
    return out


def write_draws_csv(path, design, chains):
    names = (design.coef_names + chains[0].tau2_names + chains[0].omega_names)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["chain", "draw"] + names) + "\n")
        for c, ch in enumerate(chains):
            beta = _original_scale(design, ch.beta)
            for i in range(ch.n_draws):
                row = [str(c), str(i)]
                row += [_fmt(v) for v in beta[i]]
                row += [_fmt(v) for v in ch.tau2[i]]
                row += [_fmt(v) for v in ch.omega[i]]
                fh.write(",".join(row) + "\n")


def read_draws_csv(path, design):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    arr = np.array(rows, dtype=float)
    D = design.dim
    beta = _internal_scale(design, arr[:, 2 : 2 + D])
    return {"chain": arr[:, 0].astype(int), "beta": beta,
            "rest": arr[:, 2 + D :], "names": header}


def summarize(design, chains) -> dict:
    beta = np.vstack([_original_scale(design, ch.beta) for ch in chains])
    tau2 = np.vstack([ch.tau2 for ch in chains])
    omega = np.vstack([ch.omega for ch in chains])
    mat = np.hstack([beta, tau2, omega])
    names = design.coef_names + chains[0].tau2_names + chains[0].omega_names
    q = np.percentile(mat, [2.5, 97.5], axis=0)
    coef = {
        name: {
            "mean": float(mat[:, j].mean()),
            "sd": float(mat[:, j].std(ddof=1)) if mat.shape[0] > 1 else 0.0,
            "q2.5": float(q[0, j]),
            "q97.5": float(q[1, j]),
        }
        for j, name in enumerate(names)
    }
    logpmf = np.vstack([ch.obs_logpmf for ch in chains])
    w, lppd, p_waic = diagnostics.waic(logpmf)
    return {
        "coefficients": coef,
        "waic": w,
        "lppd": lppd,
        "p_waic": p_waic,
        "divergences": int(sum(ch.divergences for ch in chains)),
        "n_draws": int(mat.shape[0]),
    }


def _rebuild(manifest_path):
    manifest = _load_json(manifest_path)
    cfg_path, data_path = manifest["config_path"], manifest["data_path"]
    for path, key in ((cfg_path, "config_hash"), (data_path, "data_hash")):
        if _sha256(path) != manifest[key]:
            raise ConfigError(f"stale artifact: {path} no longer matches its recorded hash")
    if manifest.get("version") != __version__:
        raise ConfigError("stale artifact: fit was produced by a different package version")
    spec, schema, nuts = parse_model_config(_load_json(cfg_path))
    train = _load_data(data_path, schema)
    design = build_design(spec, train)
    draws = read_draws_csv(Path(manifest_path).parent / manifest["draws_file"], design)
    return manifest, spec, schema, nuts, design, draws


# ---------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(__version__)
def main():
    """Bayesian transformation models for count and ordinal responses."""


def _run(fn):
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (DataError, IngestError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except RuntimeError as exc:
        click.echo(f"sampler error: {exc}", err=True)
        sys.exit(EXIT_SAMPLER)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--chains", type=int, default=None, help="Overrides the config chain count.")
@click.option("--threads", type=int, default=1, show_default=True)
def fit(config_path, data_path, out_dir, seed, chains, threads):
    """Fit a model and persist draws, summary and manifest."""

    def go():
        t0 = time.perf_counter()
        spec, schema, nuts = parse_model_config(_load_json(config_path))
        if seed is not None:
            nuts.seed = seed
        if chains is not None:
            nuts.chains = chains
        data = _load_data(data_path, schema)
        design = build_design(spec, data)
        results = run_chains(spec, data, nuts, design=design)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_draws_csv(out / "draws.csv", design, results)
        (out / "summary.json").write_text(
            json.dumps(summarize(design, results), indent=2, sort_keys=True) + "\n")
        manifest = {
            "version": __version__,
            "config_path": str(Path(config_path).resolve()),
            "config_hash": _sha256(config_path),
            "data_path": str(Path(data_path).resolve()),
            "data_hash": _sha256(data_path),
            "seed": nuts.seed,
            "chains": nuts.chains,
            "runtime_s": time.perf_counter() - t0,
            "draws_file": "draws.csv",
            "summary_file": "summary.json",
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        click.echo(f"fit written to {out}")

    _run(go)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--ys", default=None, help="Comma-separated response values to evaluate.")
def predict(manifest_path, data_path, out_dir, ys):
    """Predictive CDF/PMF table for new data."""

    def go():
        manifest, spec, schema, nuts, design, draws = _rebuild(manifest_path)
        schema_new = {k: v for k, v in schema.items() if k != spec.response_col}
        newdata = _load_data(data_path, schema_new)
        if spec.response_kind == "ordinal":
            values = np.arange(1, spec.n_categories + 1)
        elif ys is not None:
            values = np.array(sorted({int(v) for v in ys.split(",")}))
        else:
            values = np.arange(0, int(design.y.max()) + 1)
        pmf = predict_pmf_grid(design, draws["beta"], newdata, y_grid=np.array([values.max()]))
        cdf = np.cumsum(pmf, axis=1)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        off = 1 if spec.response_kind == "ordinal" else 0
        with open(out / "predictions.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("row,y,pmf,cdf\n")
            for i in range(pmf.shape[0]):
                for v in values:
                    fh.write(f"{i},{v},{_fmt(pmf[i, v - off])},{_fmt(cdf[i, v - off])}\n")
        click.echo(f"predictions written to {out / 'predictions.csv'}")

    _run(go)


@main.command()
@click.option("--manifest", "manifest_path", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def score(manifest_path, config_path, data_path, out_dir, folds, seed):
    """Score a fit on held-out data, or run k-fold cross-validation."""

    def go():
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if manifest_path is not None:
            manifest, spec, schema, nuts, design, draws = _rebuild(manifest_path)
            data = _load_data(data_path, schema)
            rep = diagnostics.score_fit(design, draws["beta"], data)
            logpmf = None
        elif config_path is not None:
            spec, schema, nuts = parse_model_config(_load_json(config_path))
            data = _load_data(data_path, schema)
            rep = diagnostics.kfold_cv(spec, data, nuts, k=folds, seed=seed)
        else:
            raise ConfigError("either --manifest or --config is required")
        report = {
            "logarithmic": rep.logarithmic,
            "brier": rep.brier,
            "spherical": rep.spherical,
            "n": rep.n,
            "per_fold": [
                {"logarithmic": f.logarithmic, "brier": f.brier, "spherical": f.spherical, "n": f.n}
                for f in rep.per_fold
            ],
            "unseen_level_folds": rep.unseen_level_folds,
        }
        (out / "scores.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        with open(out / "scores.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("fold,logarithmic,brier,spherical,n\n")
            fh.write(f"all,{_fmt(rep.logarithmic)},{_fmt(rep.brier)},{_fmt(rep.spherical)},{rep.n}\n")
            for i, f in enumerate(rep.per_fold):
                fh.write(f"{i},{_fmt(f.logarithmic)},{_fmt(f.brier)},{_fmt(f.spherical)},{f.n}\n")
        click.echo(f"scores written to {out}")

    _run(go)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Residual RNG seed (default: fit seed).")
def diagnose(manifest_path, data_path, out_dir, seed):
    """Rootogram columns and randomized quantile residuals."""

    def go():
        manifest, spec, schema, nuts, design, draws = _rebuild(manifest_path)
        data = _load_data(data_path, schema)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if spec.response_kind == "count":
            rg = diagnostics.rootogram(design, draws["beta"], data)
            with open(out / "rootogram.csv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write("r,obs,exp,sqrt_obs,sqrt_exp\n")
                for i, r in enumerate(rg.values):
                    fh.write(
                        f"{r},{_fmt(rg.observed[i])},{_fmt(rg.expected[i])},"
                        f"{_fmt(rg.sqrt_observed[i])},{_fmt(rg.sqrt_expected[i])}\n")
        rng = np.random.default_rng(manifest["seed"] if seed is None else seed)
        res = diagnostics.quantile_residuals(design, draws["beta"], data, rng)
        with open(out / "residuals.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("row,residual\n")
            for i, r in enumerate(res):
                fh.write(f"{i},{_fmt(r)}\n")
        click.echo(f"diagnostics written to {out}")

    _run(go)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def simulate(config_path, out_dir):
    """Run the simulation experiment described by the config file."""

    def go():
        cfg = _load_json(config_path)
        s = cfg.get("sampler", {})
        nuts = NutsConfig(
            iterations=int(s.get("iterations", 2000)),
            burnin=int(s.get("burnin", 1000)),
            target_accept=float(s.get("target_accept", 0.8)),
            max_treedepth=int(s.get("max_treedepth", 10)),
        )
        rows = simstudy.run_experiment(
            replications=int(cfg.get("replications", 10)),
            n_train=int(cfg.get("n_train", 250)),
            n_test=int(cfg.get("n_test", 750)),
            config=nuts,
            master_seed=int(cfg.get("seed", 20240801)),
            dgps=tuple(cfg.get("dgps", simstudy.DGP_KINDS)),
            models=tuple(cfg.get("models", simstudy.MODELS)),
            progress=lambda row: click.echo(
                f"{row['replication']} {row['dgp']} {row['model']} "
                f"{row['centered_oos_loglik']:.2f} ({row['runtime_s']:.1f}s)", err=True),
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = ["replication", "dgp", "model", "centered_oos_loglik", "runtime_s", "divergences", "error"]
        with open(out / "results.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")
        click.echo(f"results written to {out / 'results.csv'}")

    _run(go)


if __name__ == "__main__":
    main()
