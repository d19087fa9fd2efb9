"""``crossquad <experiment> [options]``: run one experiment and write CSV + JSON."""

from __future__ import annotations

import argparse
import json
import sys

from crossquad.harness import (
    EXIT_CONFIG,
    EXPERIMENTS,
    OUTPUT_ENV,
    ConfigError,
    ExperimentConfig,
    run_experiment,
)


def _gamma(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be 'auto' or a number, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crossquad",
        description="Desk-scale reproductions of the crossover experiments.",
        epilog=f"Output goes to --out, else ${OUTPUT_ENV}/<experiment>.csv, else ./<experiment>.csv. "
               "A JSON summary is written next to the CSV.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--n", dest="n_dims", type=int, nargs="+", help="number of binary variables N")
    p.add_argument("--k", dest="degree", type=int, nargs="+", help="cost degree K")
    p.add_argument("--m", dest="samples", type=int, nargs="+", help="samples per generation M")
    p.add_argument("--gamma", type=_gamma, nargs="+", help="crossover rate, a number in [0, 0.5] or 'auto'")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_path")
    p.add_argument("--threads", type=int, help="worker threads (default: CPU count)")
    p.add_argument("--exhaustive-cap", dest="exhaustive_cap", type=int)
    p.add_argument("--k-hat", dest="k_hat", type=float, help="effective degree for 'predict'")
    p.add_argument("--ms-per-trial", dest="ms_per_trial", type=float)
    p.add_argument("--cities", dest="n_cities", type=int)
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--instance", help="TSP instance file, one 'x y' per line")
    p.add_argument("--config", help="JSON file of config values; flags override it")
    p.add_argument("--paper-scale", dest="paper_scale", action="store_true",
                   help="use the full-size settings (slow, memory hungry)")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    for key, value in vars(args).items():
        if key != "config" and value is not None and value is not False:
            values[key] = value
    samples = values.get("samples")
    if isinstance(samples, list) and len(samples) == 1:
        values["samples"] = samples[0]
    for key in ("n_dims", "degree", "gamma"):
        if key in values and not isinstance(values[key], list):
            values[key] = [values[key]]
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (OSError, ValueError) as exc:
        print(f"crossquad: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, path = run_experiment(cfg)
    if path is not None:
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
