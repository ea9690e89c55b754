"""Declarative Monte Carlo experiment runner.

A config names a scenario, a population model (or canned factor design), an
entry law, a replication count and a master seed; ``run`` executes the
replications with derived per-rep seeds and aggregates scenario-specific
statistics into an ExperimentResult that ``emit`` serializes to JSON/CSV.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import eigh as dense_eigh
from scipy.stats import kstest, norm

from . import twlaw
from .asymptotics import (clt_variance, quadratic_form_statistic, spike_ci,
                          spike_limit_closed_form, stieltjes_fixed_point)
from .covmodel import (FactorModelSpec, PopulationCovariance, bulk_projector_matrix,
                       build_factor_model, gamma_matrix, model_from_spec)
from .errors import ConfigError, SpikeSpectraError
from .sampler import EntryDistribution, covariance_from_observations, draw_data, rep_seed, spectrum
from .spikecount import ceil_root, estimate_k

SCENARIOS = ("table_1_1", "factor_tables", "clt_spike", "clt_quadform", "tw_edge", "custom")
MAX_FAILURE_FRACTION = 0.01


@dataclass
class ExperimentConfig:
    """Declarative scenario description; everything JSON-serializable."""

    scenario: str
    reps: int = 200
    master_seed: int = 0
    n: int | None = None
    model: dict | None = None
    dist: str | dict = "standard_normal"
    centered: bool = False
    estimator_opts: dict = field(default_factory=dict)
    spike_indices: list = field(default_factory=lambda: [1])
    quadform: dict | None = None
    ci_level: float = 0.95
    workers: int = 1
    keep_raw: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentResult:
    """Aggregates plus optional per-rep raw statistics."""

    scenario: str
    cells: list
    raw: dict | None
    reps: int
    failures: int
    master_seed: int
    runtime_seconds: float
    config: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentResult":
        return cls(**json.loads(text))


def entry_distribution(spec) -> EntryDistribution:
    """EntryDistribution from a config value (kind string or dict)."""
    if isinstance(spec, EntryDistribution):
        return spec
    if isinstance(spec, str):
        return EntryDistribution(kind=spec)
    if isinstance(spec, dict):
        return EntryDistribution(kind=spec["kind"], values=spec.get("values"),
                                 probabilities=spec.get("probabilities"))
    raise ConfigError(f"cannot interpret entry distribution {spec!r}")


def factor_design_model(n: int, p: int, r: float, noise: str = "T1"):
    """Canned factor design: K = 5 ceil(n^{1/7}) + 1 diagonal loadings.

    Loading column i carries sqrt(b_i^2 - 1) with b_i = sqrt((5 + i) r) + 1;
    the noise transform is the identity (T1) or the half/half diagonal with
    entries 1 and 1/sqrt(2) (T2). Returns (model, K).
    """
    k = 5 * ceil_root(n, 7) + 1
    if k > p // 2:
        raise ConfigError(f"factor design needs K={k} <= p/2={p // 2}")
    b = np.sqrt(np.arange(6, 6 + k) * r) + 1.0
    loadings = np.zeros((p, k))
    loadings[np.arange(k), np.arange(k)] = np.sqrt(b ** 2 - 1.0)
    if noise == "T1":
        t = np.eye(p)
    elif noise == "T2":
        t = np.diag(np.concatenate([np.ones(p // 2), np.full(p - p // 2, 1.0 / np.sqrt(2.0))]))
    else:
        raise ConfigError(f"unknown noise transform {noise!r}")
    return build_factor_model(FactorModelSpec(loadings=loadings, noise_transform=t)), k


def _resolve_model(config: ExperimentConfig):
    """Build (model, true_k, design_echo) from the config's model entry."""
    raw = config.model
    if raw is None:
        raise ConfigError(f"scenario {config.scenario!r} needs a model")
    if raw.get("kind") == "factor_design":
        n = int(raw.get("n", config.n))
        model, k = factor_design_model(n, int(raw["p"]), float(raw["r"]),
                                       raw.get("noise", "T1"))
        return model, k, {"n": n, "p": int(raw["p"]), "r": float(raw["r"]),
                          "noise": raw.get("noise", "T1")}
    model = model_from_spec(raw)
    return model, model.n_spikes, None


def _unit_vector(spec, length):
    if isinstance(spec, str) and spec.startswith("e"):
        idx = int(spec[1:]) - 1
        vec = np.zeros(length)
        vec[idx] = 1.0
        return vec
    vec = np.asarray(spec, dtype=float).ravel()
    if vec.size != length:
        raise ConfigError(f"vector length {vec.size} != {length}")
    return vec


@dataclass
class _RepContext:
    """Everything a replication needs, precomputed once per run."""

    scenario: str
    master_seed: int
    dist: EntryDistribution
    n: int
    rows: int
    centered: bool
    gamma: np.ndarray | None = None
    model: PopulationCovariance | None = None
    true_k: int = 0
    estimator_opts: dict = field(default_factory=dict)
    mu_scale: float = 1.0
    spike_indices: tuple = (1,)
    thetas: dict = field(default_factory=dict)
    sigmas: dict = field(default_factory=dict)
    ci_level: float = 0.95
    law: twlaw.BulkLaw | None = None
    sigma1: np.ndarray | None = None
    sigma1_eigs: np.ndarray | None = None
    m_tilde: float = -1.0
    theta: float = 0.0
    w1: np.ndarray | None = None
    w2: np.ndarray | None = None
    gamma4: float = 3.0


def _top_eigenvalues(s: np.ndarray, k: int) -> np.ndarray:
    p = s.shape[0]
    vals = dense_eigh(s, subset_by_index=(p - k, p - 1), eigvals_only=True)
    return vals[::-1]


def _execute_rep(ctx: _RepContext, rep: int) -> dict:
    seed = rep_seed(ctx.master_seed, rep)
    x = draw_data(ctx.rows, ctx.n, ctx.dist, seed)
    if ctx.scenario == "clt_quadform":
        stat = quadratic_form_statistic(
            ctx.w1, x, ctx.sigma1, ctx.theta, ctx.gamma4, w2=ctx.w2,
            sigma1_eigs=ctx.sigma1_eigs, m_tilde=ctx.m_tilde if ctx.w2 is None else None)
        return {"statistic": float(stat)}

    y = ctx.gamma @ x
    s = covariance_from_observations(y, centered=ctx.centered)
    if ctx.scenario == "table_1_1":
        lam1 = float(_top_eigenvalues(s, 1)[0])
        return {"statistic": float(np.sqrt(ctx.n) * lam1 / ctx.mu_scale)}
    if ctx.scenario in ("factor_tables", "custom"):
        spec = spectrum(s, n=ctx.n, centered=ctx.centered)
        inference = estimate_k(spec, **ctx.estimator_opts)
        return {"k_hat": inference.k_hat, "p_end": inference.p_end,
                "sigma_hat": inference.sigma_hat, "f_hat": inference.f_hat}
    if ctx.scenario == "clt_spike":
        top = _top_eigenvalues(s, max(ctx.spike_indices))
        out = {}
        for i in ctx.spike_indices:
            lam = float(top[i - 1])
            theta = ctx.thetas[i]
            sigma = ctx.sigmas[i]
            stat = np.sqrt(ctx.n) * (lam - theta) / (theta * sigma)
            lo, hi = spike_ci(lam, sigma, ctx.n, ctx.ci_level)
            out[f"statistic_{i}"] = float(stat)
            out[f"covered_{i}"] = float(lo <= theta <= hi)
        return out
    if ctx.scenario == "tw_edge":
        k = ctx.true_k
        lam = float(_top_eigenvalues(s, k + 1)[k])
        return {"statistic": twlaw.edge_statistic(lam, ctx.law, ctx.n)}
    raise ConfigError(f"unhandled scenario {ctx.scenario!r}")


_WORKER_CTX = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_rep(rep):
    try:
        return rep, _execute_rep(_WORKER_CTX, rep), None
    except (SpikeSpectraError, np.linalg.LinAlgError) as exc:
        return rep, None, repr(exc)


def _build_context(config: ExperimentConfig) -> _RepContext:
    dist = entry_distribution(config.dist)
    scenario = config.scenario

    if scenario == "clt_quadform":
        qf = config.quadform or {}
        model = model_from_spec(config.model) if config.model else None
        n = int(config.n)
        if model is not None:
            rows = model.p + model.l
            sigma1 = bulk_projector_matrix(model)
            diag = np.diagonal(sigma1)
            if np.count_nonzero(sigma1 - np.diag(diag)) == 0:
                sigma1 = diag.copy()
            sigma1_eigs = np.concatenate([model.bulk, np.zeros(rows - model.bulk.size)])
            theta_spec = qf.get("theta", "spike_1")
            if theta_spec == "spike_1":
                theta = spike_limit_closed_form(model.spikes[0], model.bulk, n).theta
            else:
                theta = float(theta_spec)
            m_tilde = stieltjes_fixed_point(model.bulk, n, theta, z=1.0)
        else:
            rows = int(qf["rows"])
            sigma1, sigma1_eigs, m_tilde = None, None, -1.0
            theta = float(qf.get("theta", 1.0))
        w1 = _unit_vector(qf.get("w1", "e1"), rows)
        w2 = _unit_vector(qf["w2"], rows) if qf.get("w2") is not None else None
        return _RepContext(scenario=scenario, master_seed=config.master_seed, dist=dist,
                           n=n, rows=rows, centered=config.centered, model=model,
                           sigma1=sigma1, sigma1_eigs=sigma1_eigs, m_tilde=m_tilde,
                           theta=theta, w1=w1, w2=w2, gamma4=dist.gamma4)

    model, true_k, _ = _resolve_model(config)
    n = int(config.n) if config.n is not None else model.p
    gamma = gamma_matrix(model)
    ctx = _RepContext(scenario=scenario, master_seed=config.master_seed, dist=dist,
                      n=n, rows=model.p + model.l, centered=config.centered,
                      gamma=gamma, model=model, true_k=true_k,
                      estimator_opts=dict(config.estimator_opts),
                      ci_level=config.ci_level)
    if scenario == "table_1_1":
        ctx.mu_scale = float(model.spikes[0])
    elif scenario == "clt_spike":
        indices = tuple(int(i) for i in config.spike_indices)
        if not indices or max(indices) > model.n_spikes:
            raise ConfigError("spike_indices outside the model's spike range")
        variance = clt_variance(model.u_factor[:model.n_spikes], dist.gamma4)
        ctx.spike_indices = indices
        ctx.thetas = {i: spike_limit_closed_form(model.spikes[i - 1], model.bulk, n).theta
                      for i in indices}
        ctx.sigmas = {i: float(np.sqrt(variance.sigma_sq[i - 1])) for i in indices}
    elif scenario == "tw_edge":
        ctx.law = twlaw.bulk_edge(model.bulk, n)
    return ctx


def _aggregate(config: ExperimentConfig, ctx: _RepContext, raw: dict) -> list:
    scenario = config.scenario
    if scenario == "table_1_1":
        stats = np.asarray(raw["statistic"])
        return [{"p": ctx.model.p, "n": ctx.n, "mu": ctx.mu_scale,
                 "reps_effective": stats.size,
                 "mean": float(stats.mean()),
                 "variance": float(stats.var(ddof=1))}]
    if scenario in ("factor_tables", "custom"):
        k_hats = np.asarray(raw["k_hat"], dtype=int)
        cell = {"n": ctx.n, "p": ctx.model.p, "k_true": ctx.true_k,
                "reps_effective": k_hats.size,
                "ratio_correct": float(np.mean(k_hats == ctx.true_k)),
                "mean_k_hat": float(k_hats.mean()),
                "mean_f_hat": float(np.nanmean(np.asarray(raw["f_hat"])))}
        if config.model.get("kind") == "factor_design":
            cell["r"] = config.model["r"]
            cell["noise"] = config.model.get("noise", "T1")
        return [cell]
    if scenario == "clt_spike":
        cells = []
        for i in ctx.spike_indices:
            stats = np.asarray(raw[f"statistic_{i}"])
            covered = np.asarray(raw[f"covered_{i}"])
            cells.append({"spike": i, "theta": ctx.thetas[i],
                          "sigma": ctx.sigmas[i], "reps_effective": stats.size,
                          "mean": float(stats.mean()),
                          "variance": float(stats.var(ddof=1)),
                          "ks_normal": float(kstest(stats, norm.cdf).statistic),
                          "ci_coverage": float(covered.mean()),
                          "ci_level": ctx.ci_level})
        return cells
    if scenario == "clt_quadform":
        stats = np.asarray(raw["statistic"])
        return [{"n": ctx.n, "reps_effective": stats.size,
                 "mean": float(stats.mean()),
                 "variance": float(stats.var(ddof=1)),
                 "ks_normal": float(kstest(stats, norm.cdf).statistic)}]
    if scenario == "tw_edge":
        stats = np.asarray(raw["statistic"])
        return [{"n": ctx.n, "p": ctx.model.p, "k": ctx.true_k,
                 "gamma_plus": ctx.law.gamma_plus, "sigma_n": ctx.law.sigma_n,
                 "reps_effective": stats.size,
                 "mean": float(stats.mean()),
                 "variance": float(stats.var(ddof=1)),
                 "ks_tw1": float(kstest(stats, twlaw.tw1_cdf).statistic),
                 "q99_empirical": float(np.quantile(stats, 0.99))}]
    raise ConfigError(f"unhandled scenario {scenario!r}")


def run(config: ExperimentConfig) -> ExperimentResult:
    """Execute all replications and aggregate per the scenario.

    Failed replications are recorded and excluded, never retried; the run
    aborts once failures exceed 1% of reps. Aggregation happens on raw
    statistics ordered by rep index, so worker scheduling cannot change the
    result.
    """
    start = time.time()
    ctx = _build_context(config)
    outcomes = [None] * config.reps
    failures = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers,
                                 initializer=_init_worker, initargs=(ctx,)) as pool:
            for rep, payload, err in pool.map(_worker_rep, range(config.reps),
                                              chunksize=max(1, config.reps // (4 * config.workers))):
                outcomes[rep] = payload
                if err is not None:
                    failures.append((rep, err))
    else:
        for rep in range(config.reps):
            try:
                outcomes[rep] = _execute_rep(ctx, rep)
            except (SpikeSpectraError, np.linalg.LinAlgError) as exc:
                failures.append((rep, repr(exc)))
                _check_failures(failures, config.reps)
    _check_failures(failures, config.reps)
    if all(o is None for o in outcomes):
        raise SpikeSpectraError("every replication failed")

    keys = next(o for o in outcomes if o is not None).keys()
    raw = {k: [o[k] for o in outcomes if o is not None] for k in keys}
    cells = _aggregate(config, ctx, raw)
    return ExperimentResult(
        scenario=config.scenario, cells=cells,
        raw=raw if config.keep_raw else None,
        reps=config.reps, failures=len(failures),
        master_seed=config.master_seed,
        runtime_seconds=time.time() - start,
        config=asdict(config))


def _check_failures(failures, reps):
    if len(failures) > max(1, int(MAX_FAILURE_FRACTION * reps)):
        raise SpikeSpectraError(
            f"{len(failures)} of {reps} replications failed; first: {failures[0]}")


def emit(result: ExperimentResult, out_dir, formats=("json", "csv")) -> list:
    """Write the result under ``out_dir`` as result.json / result.csv."""
    import pathlib

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out_dir / "result.json"
        path.write_text(result.to_json())
        written.append(path)
    if "csv" in formats:
        path = out_dir / "result.csv"
        meta_cols = ["scenario", "reps", "master_seed"]
        cell_cols = sorted({k for cell in result.cells for k in cell})
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(meta_cols + cell_cols)
            for cell in result.cells:
                writer.writerow([result.scenario, result.reps, result.master_seed]
                                + [cell.get(c, "") for c in cell_cols])
        written.append(path)
    return written


def canned_config(name: str, reps: int = 200, master_seed: int = 0,
                  **overrides) -> ExperimentConfig:
    """Presets for the standard simulation designs.

    ``table_1_1_s2``/``table_1_1_s3``: variance of the rescaled largest
    eigenvalue for the diagonal and rotated two-spike models (p = n, uniform
    entries, spikes 800/200, bulk uniform on (1, 2)).
    ``factor_t1``/``factor_t2``: correct-count ratio for the canned factor
    designs. ``tw_edge_null``: no-spike identity-bulk edge law check.
    """
    base: dict
    if name in ("table_1_1_s2", "table_1_1_s3"):
        p = int(overrides.pop("p", 400))
        model = {"kind": "spiked", "spikes": [800.0, 200.0],
                 "bulk": {"distribution": "uniform", "low": 1.0, "high": 2.0,
                          "count": p - 2, "seed": 1234},
                 "u": "transpose_of_v"}
        if name.endswith("s3"):
            half = float(np.sqrt(0.5))
            model["v"] = {"top_block": [[half, half], [half, -half]]}
        base = {"scenario": "table_1_1", "n": p, "model": model, "dist": "uniform_sym"}
    elif name in ("factor_t1", "factor_t2"):
        n = int(overrides.pop("n", 100))
        p = int(overrides.pop("p", 100))
        r = float(overrides.pop("r", 0.5))
        base = {"scenario": "factor_tables", "n": n,
                "model": {"kind": "factor_design", "n": n, "p": p, "r": r,
                          "noise": "T1" if name.endswith("t1") else "T2"}}
    elif name == "tw_edge_null":
        p = int(overrides.pop("p", 500))
        base = {"scenario": "tw_edge", "n": int(overrides.pop("n", p)),
                "model": {"kind": "spiked", "spikes": [],
                          "bulk": [1.0] * p}}
    else:
        raise ConfigError(f"unknown canned config {name!r}")
    base.update({"reps": reps, "master_seed": master_seed})
    base.update(overrides)
    return ExperimentConfig.from_dict(base)
