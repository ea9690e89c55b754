"""Command-line interface.

Subcommands: ``run`` (experiment config -> results), ``estimate-k`` (spike
count from an observed CSV matrix), ``eigcheck`` (eigenvector diagnostics
for a model), ``tw`` (Tracy-Widom quantiles/CDF values).

Exit codes: 0 success, 2 configuration error, 3 run failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from . import eigcheck as eig
from . import harness, twlaw
from .covmodel import load_model
from .errors import ConfigError, DomainError, SpikeSpectraError
from .sampler import (EntryDistribution, draw_data, load_csv_matrix, rep_seed,
                      sample_covariance, spectrum)
from .spikecount import count_factors

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3


def _cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        config = harness.ExperimentConfig.from_dict(raw)
        if args.workers is not None:
            config.workers = args.workers
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = harness.run(config)
        written = harness.emit(result, args.out)
    except (SpikeSpectraError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    for cell in result.cells:
        print(json.dumps(cell, sort_keys=True))
    print(f"wrote {', '.join(str(p) for p in written)}")
    return EXIT_OK


def _cmd_estimate_k(args) -> int:
    try:
        data = load_csv_matrix(args.input)
    except (OSError, ValueError) as exc:
        print(f"config error: cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        quantile_value = twlaw.tw1_quantile(args.quantile)
        inference = count_factors(data, centered=args.centered,
                                  index_multiplier=args.multiplier,
                                  quantile_value=quantile_value)
    except SpikeSpectraError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    payload = asdict(inference)
    payload["quantile_level"] = args.quantile
    payload["quantile_value"] = quantile_value
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)
    return EXIT_OK


def _cmd_eigcheck(args) -> int:
    try:
        model = load_model(args.model)
        dist = EntryDistribution(kind=args.dist)
    except (OSError, json.JSONDecodeError, SpikeSpectraError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = model.p + model.l
        per_spike = {i: [] for i in range(1, model.n_spikes + 1)}
        fourth = {i: [] for i in range(1, model.n_spikes + 1)}
        completeness_err = 0.0
        for rep in range(args.reps):
            x = draw_data(rows, args.n, dist, rep_seed(args.seed, rep))
            spec = spectrum(sample_covariance(model, x), n=args.n)
            report = eig.alignment_report(model, spec)
            for i, value in report.per_spike:
                per_spike[i].append(value)
            for i, value in enumerate(report.fourth_moments, start=1):
                fourth[i].append(value)
            for i in range(1, model.n_spikes + 1):
                completeness_err = max(
                    completeness_err, abs(eig.completeness(model, spec, i) - 1.0))
        payload = {
            "n": args.n, "p": model.p, "reps": args.reps, "seed": args.seed,
            "completeness_max_error": completeness_err,
            "per_spike": [
                {"index": i,
                 "alignment_median": float(np.median(per_spike[i])),
                 "alignment_q05": float(np.quantile(per_spike[i], 0.05)),
                 "fourth_moment_median": float(np.median(fourth[i]))}
                for i in sorted(per_spike)],
        }
    except SpikeSpectraError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)
    return EXIT_OK


def _cmd_tw(args) -> int:
    try:
        if args.cdf is not None:
            print(f"{twlaw.tw1_cdf(args.cdf):.9f}")
        else:
            print(f"{twlaw.tw1_quantile(args.quantile):.6f}")
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spike-spectra",
                                     description="Spiked covariance spectral inference")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo experiment config")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_est = sub.add_parser("estimate-k", help="estimate the spike count from CSV data")
    p_est.add_argument("--input", required=True, help="CSV matrix, rows = variables")
    p_est.add_argument("--centered", action="store_true")
    p_est.add_argument("--multiplier", type=int, default=15)
    p_est.add_argument("--quantile", type=float, default=0.99,
                       help="Tracy-Widom level for the threshold increment")
    p_est.add_argument("--out", default=None, help="result JSON path")
    p_est.set_defaults(func=_cmd_estimate_k)

    p_eig = sub.add_parser("eigcheck", help="eigenvector alignment diagnostics")
    p_eig.add_argument("--model", required=True, help="model spec JSON")
    p_eig.add_argument("--seed", type=int, default=0)
    p_eig.add_argument("--n", type=int, required=True, help="sample size per rep")
    p_eig.add_argument("--reps", type=int, default=50)
    p_eig.add_argument("--dist", default="standard_normal")
    p_eig.add_argument("--out", default=None)
    p_eig.set_defaults(func=_cmd_eigcheck)

    p_tw = sub.add_parser("tw", help="Tracy-Widom quantile / CDF lookup")
    p_tw.add_argument("--quantile", type=float, default=0.99)
    p_tw.add_argument("--cdf", type=float, default=None,
                      help="evaluate the CDF at this point instead")
    p_tw.set_defaults(func=_cmd_tw)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
