"""Experiment configuration and dispatch."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..baselines import METHODS as BASELINE_METHODS
from ..baselines import BaselineConfig, run_baseline
from ..data import SparseDataset, doubling_sizes, load_libsvm, validate_level_sizes
from ..errors import ConfigError, DivergenceError
from ..multilevel import LevelConfig, train_mlvr
from ..objective import LogisticObjective
from ..solvers import CgConfig
from ..trace import BUDGET, CONVERGED, DIVERGED, Trace, write_csv
from .reference import cached_reference

log = logging.getLogger(__name__)

METHODS = BASELINE_METHODS + ("mlvr",)
EXIT_STATUS = {CONVERGED: 0, BUDGET: 3, DIVERGED: 4}
DATA_SUFFIXES = ("", ".txt", ".libsvm", ".svm", ".gz", ".bz2", ".txt.gz", ".txt.bz2")
# fields that do not change what is computed
_NON_DIGEST_FIELDS = ("seed", "out", "cache_dir", "data_dir")


@dataclass
class ExperimentConfig:
    """One solver run on one dataset; mirrors the CLI flags.

    Size-like fields accept tokens relative to the dataset size ``n``:
    ``inner_iters`` takes ``"n"``, ``"5n"``, ``"0.5n"`` or ``"n/2"``, and
    ``level_sizes`` may end in ``"full"``.
    """

    dataset: str
    method: str = "mlvr"
    levels: int | None = None
    level_sizes: list | None = None
    step_size: float | None = None
    inner_iters: str | int | None = None
    hessian_samples: int | None = None
    cg_iters: int = 10
    seed: int = 0
    tol: float = 1e-9
    budget: float = 100.0
    lam: float | None = None
    n_features: int | None = None
    resample: str = "per-cycle"
    pre_steps: int = 1
    post_steps: int = 0
    coarse_steps: int = 1
    fine_optimizer: str = "gd-ls"
    coarse_optimizer: str = "newton-ls"
    correction_line_search: bool = True
    out: str | None = None
    cache_dir: str | None = None
    data_dir: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.cg_iters < 1:
            raise ConfigError("cg_iters must be >= 1")

    def digest(self) -> str:
        blob = {k: v for k, v in dataclasses.asdict(self).items() if k not in _NON_DIGEST_FIELDS}
        text = json.dumps(blob, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        norm = {k.replace("-", "_"): v for k, v in data.items()}
        if "lambda" in norm:
            norm["lam"] = norm.pop("lambda")
        unknown = set(norm) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**norm)


def resolve_count(token, n: int) -> int:
    """Turn ``12``, ``"n"``, ``"5n"``, ``"0.5n"``, ``"n/2"`` into an integer."""
    if isinstance(token, int):
        value = token
    else:
        text = str(token).strip().replace(" ", "")
        m = re.fullmatch(r"(\d*\.?\d*)\*?n(?:/(\d+))?", text)
        if m:
            mult = float(m.group(1)) if m.group(1) else 1.0
            div = int(m.group(2)) if m.group(2) else 1
            value = int(round(mult * n / div))
        elif text in ("full", "all"):
            value = n
        else:
            try:
                value = int(text)
            except ValueError:
                raise ConfigError(f"cannot interpret {token!r} as a count") from None
    if value < 1:
        raise ConfigError(f"{token!r} resolves to {value} < 1")
    return value


def resolve_level_sizes(cfg: ExperimentConfig, n: int) -> list[int]:
    """Level sizes, coarsest first, ending at ``n``.

    A full list is taken as is; a single coarsest size (from
    ``level_sizes`` or ``hessian_samples``) is doubled up to ``levels``.
    """
    tokens = list(cfg.level_sizes or [])
    levels = cfg.levels
    if not tokens:
        if cfg.hessian_samples is None:
            raise ConfigError("mlvr needs --level-sizes or --hessian-samples")
        tokens = [cfg.hessian_samples]
    sizes = [resolve_count(t, n) for t in tokens]
    if levels is None:
        levels = len(sizes) if sizes[-1] == n and len(sizes) > 1 else max(len(sizes) + 1, 2)
    if len(sizes) == levels:
        return validate_level_sizes(sizes, n)
    if len(sizes) == levels - 1:
        return validate_level_sizes(sizes + [n], n)
    if len(sizes) == 1:
        return doubling_sizes(sizes[0], levels, n)
    raise ConfigError(f"{len(sizes)} level sizes given for {levels} levels")


def resolve_dataset_path(name: str, data_dir: str | None = None) -> Path:
    candidates = [Path(name)]
    root = Path(data_dir or os.environ.get("MLVR_DATA", "."))
    candidates += [root / f"{name}{suffix}" for suffix in DATA_SUFFIXES]
    for path in candidates:
        if path.is_file():
            return path
    raise FileNotFoundError(f"dataset {name!r} not found (looked in {root})")


def load_dataset(cfg: ExperimentConfig) -> SparseDataset:
    return load_libsvm(resolve_dataset_path(cfg.dataset, cfg.data_dir), cfg.n_features)


def baseline_config(cfg: ExperimentConfig, n: int) -> BaselineConfig:
    inner = None if cfg.inner_iters is None else resolve_count(cfg.inner_iters, n)
    hess = cfg.hessian_samples
    if cfg.method == "ssn" and hess is None and cfg.level_sizes:
        hess = resolve_count(cfg.level_sizes[0], n)
    return BaselineConfig(
        method=cfg.method,
        step_size=cfg.step_size,
        inner_iters=inner,
        hessian_subset_size=None if hess is None else resolve_count(hess, n),
        hessian_resample=cfg.resample == "per-cycle",
        seed=cfg.seed,
        budget=cfg.budget,
        tol=cfg.tol,
        cg=CgConfig(max_iters=cfg.cg_iters),
    )


def level_config(cfg: ExperimentConfig) -> LevelConfig:
    return LevelConfig(
        pre_steps=cfg.pre_steps,
        post_steps=cfg.post_steps,
        coarse_steps=cfg.coarse_steps,
        fine_optimizer=cfg.fine_optimizer,
        coarse_optimizer=cfg.coarse_optimizer,
        step_size=1.0 if cfg.step_size is None else cfg.step_size,
        correction_line_search=cfg.correction_line_search,
        resample=cfg.resample,
        cg=CgConfig(max_iters=cfg.cg_iters),
    )


def run_experiment(
    cfg: ExperimentConfig,
    dataset: SparseDataset | None = None,
    f_star: float | None = None,
) -> Trace:
    """Load data, fetch ``F(w*)``, run the configured solver, write the CSV.

    Divergence does not raise: the partial trace comes back with status
    ``"diverged"`` (and is still written).
    """
    ds = load_dataset(cfg) if dataset is None else dataset
    n = ds.n_samples
    lam = 1.0 / n if cfg.lam is None else cfg.lam
    obj = LogisticObjective(ds, None, lam)
    if f_star is None:
        f_star = cached_reference(obj, cfg.cache_dir).f_star
    try:
        if cfg.method == "mlvr":
            sizes = resolve_level_sizes(cfg, n)
            trace = train_mlvr(
                ds, sizes, level_config(cfg), cfg.tol, cfg.budget, cfg.seed, f_star, lam
            )
        else:
            trace = run_baseline(obj, baseline_config(cfg, n), f_star=f_star)
    except DivergenceError as exc:
        log.warning("%s diverged: %s", cfg.method, exc)
        trace = exc.trace if exc.trace is not None else Trace(status=DIVERGED)
        trace.status = DIVERGED
    trace.info.pop("state", None)
    trace.method = cfg.method
    trace.dataset = ds.name or str(cfg.dataset)
    trace.seed = cfg.seed
    trace.config_digest = cfg.digest()
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        write_csv(trace, cfg.out)
    return trace


def _run_one(args):
    cfg, dataset, f_star = args
    return run_experiment(cfg, dataset, f_star)


def sweep(
    base: ExperimentConfig,
    methods: Sequence[str],
    seeds: Sequence[int],
    out_dir=None,
    jobs: int = 1,
) -> list[Trace]:
    """Run every (method, seed) pair; one CSV per run under ``out_dir``.

    The dataset and reference value are loaded once and shared read-only.
    """
    ds = load_dataset(base)
    lam = 1.0 / ds.n_samples if base.lam is None else base.lam
    f_star = cached_reference(LogisticObjective(ds, None, lam), base.cache_dir).f_star
    configs = []
    for method in methods:
        for seed in seeds:
            out = None
            if out_dir is not None:
                out = str(Path(out_dir) / f"{ds.name or 'data'}_{method}_seed{seed}.csv")
            configs.append(dataclasses.replace(base, method=method, seed=seed, out=out))
    work = [(c, ds, f_star) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, work))
    return [_run_one(w) for w in work]
