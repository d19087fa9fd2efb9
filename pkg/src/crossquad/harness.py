"""Experiment runner: seeded replicas, CSV rows and a JSON summary per experiment."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from crossquad import cost as costmod
from crossquad import crossover, landscape, theory, tsp

EXPERIMENTS = ("fig1c", "fig2b", "fig3", "fig3e", "fig4", "lemma2", "predict", "tsp-solve")
OUTPUT_ENV = "CROSSQUAD_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

# Desk-scale defaults; None means "not used by this experiment".
DEFAULTS = {
    "fig1c": dict(n_dims=[10, 12, 14, 16, 18, 20], degree=[3, 4], replicas=20),
    "fig2b": dict(n_dims=[12, 14, 16, 18, 20], degree=[3], replicas=20),
    "fig3": dict(n_dims=[64], degree=[4], samples=5000, gamma=["auto"], replicas=10),
    "fig3e": dict(n_dims=[64], degree=[4], samples=100, gamma=[0.05, 0.1, 0.2, 0.3, 0.5, "auto"], replicas=10),
    "fig4": dict(n_cities=200, samples=200, gamma=[0.05], replicas=20, pool_size=10),
    "lemma2": dict(samples=[100, 1000, 10_000], replicas=2000),
    "predict": dict(n_dims=[1000], k_hat=1.14, samples=None, ms_per_trial=0.1),
    "tsp-solve": dict(n_cities=200, samples=200, gamma=[0.05], replicas=1, pool_size=10),
}
PAPER_SCALE = {
    "fig3": dict(n_dims=[200], degree=[4], samples=20_000, replicas=20),
    "fig3e": dict(n_dims=[200], degree=[4], samples=100, replicas=20),
    "fig4": dict(n_cities=500, samples=500, replicas=50),
    "tsp-solve": dict(n_cities=500, samples=500),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    n_dims: list[int] | None = None
    degree: list[int] | None = None
    samples: int | list[int] | None = None
    gamma: list | None = None
    replicas: int | None = None
    seed: int = 0
    exhaustive_cap: int = landscape.DEFAULT_EXHAUSTIVE_CAP
    output_path: str | None = None
    threads: int | None = None
    k_hat: float | None = None
    n_cities: int | None = None
    pool_size: int | None = None
    instance: str | None = None
    ms_per_trial: float | None = None
    paper_scale: bool = False

    def resolved(self) -> "ExperimentConfig":
        """Fill unset fields from the experiment defaults and validate."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        base = dict(DEFAULTS[self.experiment])
        if self.paper_scale:
            base.update(PAPER_SCALE.get(self.experiment, {}))
        cfg = ExperimentConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        for key, value in base.items():
            if getattr(cfg, key) is None:
                setattr(cfg, key, value)
        if cfg.replicas is None:
            cfg.replicas = 1
        if cfg.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if cfg.threads is not None and cfg.threads < 1:
            raise ConfigError("threads must be >= 1")
        for g in cfg.gamma or []:
            if g != "auto" and not 0.0 <= float(g) <= 0.5:
                raise ConfigError(f"gamma {g} outside [0, 0.5]")
        for n, k in ((n, k) for n in cfg.n_dims or [] for k in cfg.degree or []):
            if not 1 <= k <= n:
                raise ConfigError(f"degree {k} invalid for N={n}")
        return cfg


def derive_seed(master_seed: int, replica_index: int, stream_tag: str) -> int:
    """64-bit seed from BLAKE2b over ``"<master>:<replica>:<tag>"``.

    Collisions between distinct inputs occur with probability about 2^-64.
    """
    key = f"{int(master_seed)}:{int(replica_index)}:{stream_tag}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


# ---------------------------------------------------------------------------
# CSV

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def emit_csv(rows: list[dict], path, columns: list[str] | None = None) -> None:
    """Header then one line per row; floats carry 17 significant digits."""
    if columns is None:
        if not rows:
            raise ValueError("columns are required for an empty row list")
        columns = list(rows[0])
    for r in rows:
        if list(r) != columns:
            raise ValueError("rows are not homogeneous")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in columns])
    Path(path).write_text(buf.getvalue())


def _parse_cell(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# experiments; each returns (columns, rows, summary)

def _map_replicas(cfg: ExperimentConfig, fn: Callable[[int], list[dict]]) -> list[dict]:
    threads = cfg.threads or os.cpu_count() or 1
    if threads == 1 or cfg.replicas == 1:
        chunks = [fn(r) for r in range(cfg.replicas)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(fn, range(cfg.replicas)))
    return [row for chunk in chunks for row in chunk]


def _group_summary(rows: list[dict], keys: list[str], measured: list[str]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, grp in groups.items():
        entry = dict(zip(keys, key))
        entry["replicas"] = len(grp)
        for col in measured:
            vals = np.array([g[col] for g in grp], dtype=float)
            entry[f"{col}_mean"] = float(vals.mean())
            entry[f"{col}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append(entry)
    return out


def _fig1c(cfg):
    def one(r):
        rows = []
        for n in cfg.n_dims:
            for k in cfg.degree:
                c = costmod.generate_cost(n, k, derive_seed(cfg.seed, r, f"cost:{n}:{k}"))
                _, gm = landscape.exhaustive_global_min(c, cfg.exhaustive_cap)
                rows.append(dict(
                    experiment="fig1c", replica=r, n_dims=n, degree=k,
                    gm_measured=gm,
                    gm_predicted_leading=theory.predict_global_min(n, "leading"),
                    gm_predicted_first_order=theory.predict_global_min(n, "first_order"),
                ))
        return rows

    rows = _map_replicas(cfg, one)
    summary = _group_summary(rows, ["n_dims", "degree"], ["gm_measured"])
    for s in summary:
        s["gm_predicted_leading"] = theory.predict_global_min(s["n_dims"], "leading")
        s["gm_predicted_first_order"] = theory.predict_global_min(s["n_dims"], "first_order")
    return rows, summary


def _fig2b(cfg):
    trials = cfg.samples if isinstance(cfg.samples, int) else 1 << 22

    def one(r):
        rows = []
        for n in cfg.n_dims:
            for k in cfg.degree:
                c = costmod.generate_cost(n, k, derive_seed(cfg.seed, r, f"cost:{n}:{k}"))
                if n <= cfg.exhaustive_cap:
                    count, method = float(landscape.exhaustive_local_min_count(c, cfg.exhaustive_cap)), "exhaustive"
                else:
                    est = landscape.mc_local_min_estimate(c, trials, derive_seed(cfg.seed, r, f"mc:{n}:{k}"))
                    count, method = est.count_estimate, "monte_carlo"
                rows.append(dict(
                    experiment="fig2b", replica=r, n_dims=n, degree=k, method=method,
                    n_lm_measured=count,
                    n_lm_predicted=theory.predict_local_min_count(n, k, with_prefactor=True),
                    n_lm_predicted_no_prefactor=theory.predict_local_min_count(n, k, with_prefactor=False),
                ))
        return rows

    rows = _map_replicas(cfg, one)
    summary = _group_summary(rows, ["n_dims", "degree"], ["n_lm_measured"])
    for s in summary:
        s["n_lm_predicted"] = theory.predict_local_min_count(s["n_dims"], s["degree"], True)
    return rows, summary


def _fig3_row(r, n, k, s: crossover.RunSummary, requested):
    radius = theory.extreme_radius(s.M, "first_order")
    mu_pred = s.l_norm * s.weighted_parent_cost
    sigma_pred = math.sqrt(max(0.0, 1.0 - s.l_norm ** 2))
    return dict(
        experiment="fig3", replica=r, n_dims=n, degree=k, M=s.M,
        gamma_requested=str(requested), gamma=s.gamma, l_norm=s.l_norm,
        mu_X=s.parent_mean, sigma_X=s.parent_std, min_X_measured=s.parent_min,
        min_X_predicted=-radius,
        mu_Y_measured=s.offspring_mean, mu_Y_predicted=mu_pred,
        sigma_Y_measured=s.offspring_std, sigma_Y_predicted=sigma_pred,
        min_Y_measured=s.offspring_min, min_Y_predicted=mu_pred - radius * sigma_pred,
        deviation_ratio=s.deviation_ratio,
    )


def _fig3(cfg):
    M = int(cfg.samples)

    def one(r):
        rows = []
        for n in cfg.n_dims:
            for k in cfg.degree:
                c = costmod.generate_cost(n, k, derive_seed(cfg.seed, r, f"cost:{n}:{k}"))
                states, costs = crossover.sample_parents(c, M, derive_seed(cfg.seed, r, "parents"))
                for g in cfg.gamma:
                    s = crossover.crossover_from_parents(
                        c, states, costs, g, derive_seed(cfg.seed, r, f"offspring:{g}"))
                    rows.append(_fig3_row(r, n, k, s, g))
        return rows

    rows = _map_replicas(cfg, one)
    measured = ["gamma", "l_norm", "mu_Y_measured", "mu_Y_predicted", "sigma_Y_measured",
                "sigma_Y_predicted", "min_Y_measured", "min_Y_predicted", "min_X_measured",
                "deviation_ratio"]
    return rows, _group_summary(rows, ["n_dims", "degree", "gamma_requested"], measured)


def _fig3e(cfg):
    M = int(cfg.samples)

    def one(r):
        rows = []
        for n in cfg.n_dims:
            for k in cfg.degree:
                c = costmod.generate_cost(n, k, derive_seed(cfg.seed, r, f"cost:{n}:{k}"))
                for g in cfg.gamma:
                    s = crossover.run_combined(c, M, g, seed=derive_seed(cfg.seed, r, f"combined:{g}"))
                    sigma_pred = math.sqrt(max(0.0, 1.0 - s.l_norm ** 2))
                    rows.append(dict(
                        experiment="fig3e", replica=r, n_dims=n, degree=k, M=M,
                        gamma_requested=str(g), gamma=s.gamma,
                        l_norm_estimated=s.l_norm,
                        mu_X=s.parent_mean, sigma_X=s.parent_std, min_X_measured=s.parent_min,
                        mu_Y_measured=s.offspring_mean, sigma_Y_measured=s.offspring_std,
                        sigma_Y_predicted=sigma_pred * s.parent_std,
                        min_Y_measured=s.offspring_min,
                        offspring_not_worse=s.offspring_min <= s.parent_min,
                        deviation_ratio=s.deviation_ratio,
                    ))
        return rows

    rows = _map_replicas(cfg, one)
    measured = ["min_X_measured", "min_Y_measured", "mu_Y_measured", "sigma_Y_measured",
                "offspring_not_worse", "deviation_ratio"]
    return rows, _group_summary(rows, ["n_dims", "degree", "gamma_requested"], measured + ["gamma"])


def _tsp_row(r, inst, s: crossover.RunSummary, exp):
    return dict(
        experiment=exp, replica=r, n_cities=inst.n_cities, M=s.M, gamma=s.gamma,
        mu_X=s.parent_mean, sigma_X=s.parent_std, min_X_measured=s.parent_min,
        min_X_predicted=s.parent_mean - theory.extreme_radius(s.M) * s.parent_std,
        mu_Y_measured=s.offspring_mean, sigma_Y_measured=s.offspring_std, min_Y_measured=s.offspring_min,
        offspring_better=s.offspring_min < s.parent_min,
        deviation_ratio=s.deviation_ratio,
    )


def _fig4(cfg):
    M, pool, g = int(cfg.samples), int(cfg.pool_size), float(cfg.gamma[0])
    trajectories = {}

    def one(r):
        inst = tsp.generate_instance(cfg.n_cities, derive_seed(cfg.seed, r, "instance"))
        s = tsp.run_tsp_pipeline(inst, M, g, pool, seed=derive_seed(cfg.seed, r, "pipeline"))
        trajectories[r] = (s.parent_trajectory, s.offspring_trajectory)
        return [_tsp_row(r, inst, s, "fig4")]

    rows = _map_replicas(cfg, one)
    summary = _group_summary(rows, ["n_cities", "gamma"], ["min_X_measured", "min_Y_measured",
                                                           "offspring_better", "deviation_ratio"])
    px = np.array([trajectories[r][0] for r in sorted(trajectories)])
    py = np.array([trajectories[r][1] for r in sorted(trajectories)])
    m = np.arange(2, M + 1)
    summary.append(dict(
        trajectory="running_min",
        parent_mean=px.mean(axis=0).tolist(),
        offspring_mean=py.mean(axis=0).tolist(),
        parent_sem=(px.std(axis=0, ddof=1) / np.sqrt(len(px))).tolist() if len(px) > 1 else None,
        offspring_sem=(py.std(axis=0, ddof=1) / np.sqrt(len(py))).tolist() if len(py) > 1 else None,
        lemma2_reference=[None] + [-math.sqrt(2.0 * math.log(k)) for k in m],
    ))
    return rows, summary


def _tsp_solve(cfg):
    M, pool, g = int(cfg.samples), int(cfg.pool_size), float(cfg.gamma[0])
    if cfg.instance:
        inst = tsp.read_instance(cfg.instance)
    else:
        inst = tsp.generate_instance(cfg.n_cities, derive_seed(cfg.seed, 0, "instance"))
    s = tsp.run_tsp_pipeline(inst, M, g, pool, seed=derive_seed(cfg.seed, 0, "pipeline"))
    row = _tsp_row(0, inst, s, "tsp-solve")
    return [row], [dict(row, parent_running_min=s.parent_trajectory.tolist(),
                        offspring_running_min=s.offspring_trajectory.tolist())]


def _lemma2(cfg):
    Ms = cfg.samples if isinstance(cfg.samples, list) else [int(cfg.samples)]
    rows = []
    for M in Ms:
        rng = np.random.default_rng(derive_seed(cfg.seed, 0, f"lemma2:{M}"))
        mins = np.empty(cfg.replicas)
        step = max(1, (1 << 22) // M)
        for lo in range(0, cfg.replicas, step):
            hi = min(cfg.replicas, lo + step)
            mins[lo:hi] = rng.standard_normal((hi - lo, M)).min(axis=1)
        first = theory.predict_min_of_M(0.0, 1.0, M, "first_order")
        rows.append(dict(
            experiment="lemma2", M=M, replicas=cfg.replicas,
            mean_measured=float(mins.mean()), std_measured=float(mins.std(ddof=1)),
            mean_predicted_leading=theory.predict_min_of_M(0.0, 1.0, M, "leading").mean,
            mean_predicted_first_order=first.mean, std_predicted=first.std,
        ))
    return rows, rows


def _predict(cfg):
    rows = []
    for n in cfg.n_dims:
        count = theory.predict_local_min_count(n, cfg.k_hat, with_prefactor=False)
        seconds = count * cfg.ms_per_trial / 1000.0
        rows.append(dict(
            experiment="predict", n_dims=n, k_hat=cfg.k_hat,
            local_min_count=count,
            local_min_count_with_prefactor=theory.predict_local_min_count(n, cfg.k_hat, True),
            ms_per_trial=cfg.ms_per_trial,
            restart_years=seconds / (365.25 * 86400.0),
            crossover_days=math.sqrt(count) * cfg.ms_per_trial / 1000.0 / 86400.0,
            gm_predicted_leading=theory.predict_global_min(n, "leading"),
            gm_predicted_first_order=theory.predict_global_min(n, "first_order"),
        ))
    return rows, rows


RUNNERS = {
    "fig1c": _fig1c, "fig2b": _fig2b, "fig3": _fig3, "fig3e": _fig3e,
    "fig4": _fig4, "lemma2": _lemma2, "predict": _predict, "tsp-solve": _tsp_solve,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def default_output_path(experiment: str) -> Path:
    return Path(os.environ.get(OUTPUT_ENV, ".")) / f"{experiment}.csv"


def run_experiment(config: ExperimentConfig) -> tuple[int, Path | None]:
    """Run one experiment and write ``<out>.csv`` plus ``<out>.json``; returns (status, csv path)."""
    try:
        cfg = config.resolved()
    except ConfigError as exc:
        print(f"crossquad: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    if cfg.paper_scale:
        print("crossquad: paper-scale settings; expect large memory use and long runtimes",
              file=sys.stderr)
    out = Path(cfg.output_path) if cfg.output_path else default_output_path(cfg.experiment)
    try:
        rows, summary = RUNNERS[cfg.experiment](cfg)
    except ConfigError as exc:
        print(f"crossquad: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except (costmod.CostTooLarge, landscape.ExhaustiveCapExceeded, MemoryError) as exc:
        print(f"crossquad: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE, None
    except (ValueError, OSError) as exc:
        print(f"crossquad: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        emit_csv(rows, out)
        config_dict = {k: v for k, v in asdict(cfg).items() if k not in ("output_path", "threads")}
        payload = dict(experiment=cfg.experiment, config=config_dict, summary=summary)
        out.with_suffix(".json").write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"crossquad: cannot write output: {exc}", file=sys.stderr)
        return EXIT_RESOURCE, None
    return EXIT_OK, out
