"""Command-line entry point: ``mlvr {run,sweep,reference,inspect}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, MlvrError
from ..objective import LogisticObjective
from .reference import cached_reference
from .runner import (
    EXIT_STATUS,
    METHODS,
    ExperimentConfig,
    load_dataset,
    run_experiment,
    sweep,
)

USAGE_ERROR = 2


def _step_size(text: str):
    if text.lower() in ("ls", "line-search", "linesearch"):
        return None
    return float(text)


def _sizes(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="LIBSVM file, or a name looked up in --data-dir")
    p.add_argument("--data-dir", help="directory searched for --dataset names (env MLVR_DATA)")
    p.add_argument("--n-features", type=int, help="raise the feature dimension")
    p.add_argument("--lambda", dest="lam", type=float, help="l2 weight (default 1/n)")
    p.add_argument("--cache-dir", default=".mlvr-cache", help="reference value cache")


def _add_run_args(p: argparse.ArgumentParser, sweep_mode: bool = False) -> None:
    _add_dataset_args(p)
    p.add_argument("--config", help="JSON file whose keys mirror these flags")
    if sweep_mode:
        p.add_argument("--methods", type=lambda s: s.split(","), help="comma-separated")
        p.add_argument("--seeds", default="0", help="comma list or a:b range")
        p.add_argument("--out-dir", help="one CSV per (method, seed)")
        p.add_argument("--jobs", type=int, default=1)
    else:
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="CSV path (grad_calls,loss_diff)")
    p.add_argument("--levels", type=int)
    p.add_argument("--level-sizes", type=_sizes, help="e.g. 400,800,full")
    p.add_argument("--step-size", type=_step_size, help="number, or 'ls' for line search")
    p.add_argument("--inner-iters", help="m: integer or n, 5n, 0.5n, n/2")
    p.add_argument("--hessian-samples", type=int)
    p.add_argument("--cg-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--budget", type=float, help="max effective gradient evaluations")
    p.add_argument("--resample", choices=("per-cycle", "frozen"))
    p.add_argument("--pre-steps", type=int)
    p.add_argument("--post-steps", type=int)
    p.add_argument("--coarse-steps", type=int)
    p.add_argument("--fine-optimizer", choices=("gd", "gd-ls", "sgd", "newton", "newton-ls"))
    p.add_argument("--coarse-optimizer", choices=("gd", "gd-ls", "sgd", "newton", "newton-ls"))
    p.add_argument(
        "--no-correction-ls",
        dest="correction_line_search",
        action="store_const",
        const=False,
        help="accept coarse corrections without a fine-level line search",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlvr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_args(sub.add_parser("run", help="run one experiment"))
    _add_run_args(sub.add_parser("sweep", help="grid over methods and seeds"), sweep_mode=True)
    ref = sub.add_parser("reference", help="precompute and cache w* and F(w*)")
    _add_dataset_args(ref)
    ref.add_argument("--out", help="also write w* as JSON here")
    _add_dataset_args(sub.add_parser("inspect", help="dataset statistics"))
    return parser


_CLI_ONLY = {"command", "verbose", "config", "methods", "seeds", "out_dir", "jobs"}


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values first, then every flag given explicitly."""
    data: dict = {}
    if getattr(args, "config", None):
        data.update(json.loads(Path(args.config).read_text()))
    for key, value in vars(args).items():
        if key not in _CLI_ONLY and value is not None:
            data[key] = value
    data = {k.replace("-", "_"): v for k, v in data.items()}
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    if not data.get("dataset"):
        raise ConfigError("--dataset is required")
    return ExperimentConfig.from_mapping(data)


def _parse_seeds(text: str) -> list[int]:
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b)))
    return [int(s) for s in text.split(",")]


def cmd_run(args) -> int:
    cfg = experiment_from_args(args)
    trace = run_experiment(cfg)
    last = trace.records[-1] if trace.records else (0.0, float("nan"))
    print(
        f"{cfg.method}: {trace.status} after {last[0]:.4g} effective gradients, "
        f"F(w)-F* = {last[1]:.3e}"
    )
    return EXIT_STATUS[trace.status]


def cmd_sweep(args) -> int:
    base = experiment_from_args(args)
    methods = args.methods or [base.method]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    traces = sweep(base, methods, _parse_seeds(args.seeds), args.out_dir, args.jobs)
    for t in traces:
        print(f"{t.method}\tseed={t.seed}\t{t.status}\t{t.final_cost:.4g}\t{t.records[-1][1]:.3e}")
    return max(EXIT_STATUS[t.status] for t in traces)


def cmd_reference(args) -> int:
    cfg = experiment_from_args(args)
    ds = load_dataset(cfg)
    lam = 1.0 / ds.n_samples if cfg.lam is None else cfg.lam
    ref = cached_reference(LogisticObjective(ds, None, lam), args.cache_dir)
    print(f"F(w*) = {ref.f_star!r}  ||grad|| = {ref.grad_norm:.3e}  iterations = {ref.iterations}")
    if args.out:
        Path(args.out).write_text(
            json.dumps({"lam": lam, "f_star": ref.f_star, "w_star": ref.w_star.tolist()})
        )
    return 0 if ref.reached_tol else 1


def cmd_inspect(args) -> int:
    cfg = experiment_from_args(args)
    ds = load_dataset(cfg)
    pos = int(np.sum(ds.labels > 0))
    nnz = ds.features.nnz
    print(f"name      {ds.name}")
    print(f"n         {ds.n_samples}")
    print(f"d         {ds.n_features}")
    print(f"nnz       {nnz} (density {nnz / max(ds.n_samples * ds.n_features, 1):.4f})")
    print(f"labels    +1: {pos}  -1: {ds.n_samples - pos}")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "reference": cmd_reference, "inspect": cmd_inspect}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * args.verbose,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"mlvr: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except MlvrError as exc:
        print(f"mlvr: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
