"""Reference optimizers: GD, Newton-CG, SGD, SVRG, SARAH and sub-sampled Newton.

All runs start from ``w0`` (zero by default), own a fresh :class:`EvalCounter`
and a generator seeded from ``cfg.seed``, and record one trace entry per
outer iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import uniform_subset
from .errors import ConfigError, LineSearchError, NotDescentError
from .objective import EvalCounter, FiniteSumObjective
from .solvers import CgConfig, LineSearchConfig, backtracking_line_search, cg_solve
from .trace import Monitor, Trace

METHODS = ("gd", "newton", "sgd", "svrg", "sarah", "ssn")


@dataclass(frozen=True)
class BaselineConfig:
    """Settings for one baseline run.

    ``step_size=None`` selects backtracking line search (GD, Newton, SSN
    only). ``inner_iters`` is ``m`` for SVRG/SARAH and the number of steps
    between records for SGD; ``None`` means ``n``.
    """

    method: str = "gd"
    step_size: float | None = None
    inner_iters: int | None = None
    hessian_subset_size: int | None = None
    hessian_resample: bool = True
    seed: int = 0
    budget: float = 100.0
    tol: float = 1e-9
    cg: CgConfig = field(default_factory=CgConfig)
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.method in ("sgd", "svrg", "sarah") and self.step_size is None:
            raise ConfigError(f"{self.method} needs a fixed step_size")
        if self.inner_iters is not None and self.inner_iters < 1:
            raise ConfigError("inner_iters must be >= 1")
        if self.method == "ssn" and self.hessian_subset_size is None:
            raise ConfigError("ssn needs hessian_subset_size")


def fresh_objective(obj: FiniteSumObjective) -> tuple[FiniteSumObjective, EvalCounter]:
    """Copy ``obj`` with a new counter charged against the whole dataset."""
    counter = EvalCounter(obj.n_total)
    return obj.with_counter(counter), counter


def _monitor(obj, counter, cfg, f_star, callback) -> Monitor:
    loss = obj.with_counter(None).value
    return Monitor(loss, counter, f_star, cfg.tol, cfg.budget, callback)


def _step_length(obj, w, p, g, cfg: BaselineConfig) -> float:
    if cfg.step_size is not None:
        return cfg.step_size
    try:
        return backtracking_line_search(obj.value, w, p, g, cfg.line_search)
    except LineSearchError as exc:
        return exc.last_step
    except NotDescentError:
        # g == 0 or a degenerate CG direction: nothing to gain from moving
        return 0.0


def _start(obj, cfg, f_star, callback, w0):
    obj, counter = fresh_objective(obj)
    mon = _monitor(obj, counter, cfg, f_star, callback)
    mon.trace.method = cfg.method
    mon.trace.seed = cfg.seed
    w = np.zeros(obj.n_features) if w0 is None else np.array(w0, dtype=np.float64)
    return obj, counter, mon, w


def run_gd(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    obj, counter, mon, w = _start(obj, cfg, f_star, callback, w0)
    stop = mon.record(w)
    while not stop:
        g = obj.gradient(w)
        w = w - _step_length(obj, w, -g, g, cfg) * g
        stop = mon.record(w)
    return mon.trace


def newton_direction(hess_obj, w, g, cg: CgConfig) -> np.ndarray:
    return cg_solve(hess_obj.hessian_operator(w), -g, cg)


def run_newton_cg(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    obj, counter, mon, w = _start(obj, cfg, f_star, callback, w0)
    stop = mon.record(w)
    while not stop:
        g = obj.gradient(w)
        p = newton_direction(obj, w, g, cfg.cg)
        w = w + _step_length(obj, w, p, g, cfg) * p
        stop = mon.record(w)
    return mon.trace


def run_sgd(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    obj, counter, mon, w = _start(obj, cfg, f_star, callback, w0)
    rng = np.random.default_rng(cfg.seed)
    subset = obj.subset
    m = cfg.inner_iters or len(subset)
    stop = mon.record(w)
    while not stop:
        for t in rng.integers(len(subset), size=m):
            w = w - cfg.step_size * obj.sample_gradient(w, subset[t])
        stop = mon.record(w)
    return mon.trace


def run_svrg(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    obj, counter, mon, w = _start(obj, cfg, f_star, callback, w0)
    rng = np.random.default_rng(cfg.seed)
    subset = obj.subset
    m = cfg.inner_iters or len(subset)
    alpha = cfg.step_size
    stop = mon.record(w)
    while not stop:
        snapshot = w.copy()
        full = obj.gradient(snapshot)
        for t in rng.integers(len(subset), size=m):
            i = subset[t]
            gi = obj.sample_gradient(w, i)
            gi -= obj.sample_gradient(snapshot, i)
            w = w - alpha * (full + gi)
        stop = mon.record(w)
    return mon.trace


def run_sarah(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    obj, counter, mon, w = _start(obj, cfg, f_star, callback, w0)
    rng = np.random.default_rng(cfg.seed)
    subset = obj.subset
    m = cfg.inner_iters or len(subset)
    alpha = cfg.step_size
    stop = mon.record(w)
    while not stop:
        v = obj.gradient(w)
        w_prev, w = w, w - alpha * v
        for t in rng.integers(len(subset), size=m - 1):
            i = subset[t]
            v = obj.sample_gradient(w, i) - obj.sample_gradient(w_prev, i) + v
            w_prev, w = w, w - alpha * v
        stop = mon.record(w)
    return mon.trace


def run_ssn(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    """Sub-sampled Newton: exact gradient, Hessian over a random subset.

    The subset is redrawn every iteration unless ``cfg.hessian_resample`` is
    off, in which case one draw is reused for the whole run.
    """
    obj, counter, mon, w = _start(obj, cfg, f_star, callback, w0)
    rng = np.random.default_rng(cfg.seed)
    size = cfg.hessian_subset_size
    if size > len(obj.subset):
        raise ConfigError(f"hessian_subset_size {size} exceeds {len(obj.subset)} samples")

    def draw():
        return obj.restrict(uniform_subset(obj.subset, size, rng))

    hess_obj = None if cfg.hessian_resample else draw()
    stop = mon.record(w)
    while not stop:
        g = obj.gradient(w)
        if cfg.hessian_resample:
            hess_obj = draw()
        p = newton_direction(hess_obj, w, g, cfg.cg)
        w = w + _step_length(obj, w, p, g, cfg) * p
        stop = mon.record(w)
    return mon.trace


RUNNERS: dict[str, Callable[..., Trace]] = {
    "gd": run_gd,
    "newton": run_newton_cg,
    "sgd": run_sgd,
    "svrg": run_svrg,
    "sarah": run_sarah,
    "ssn": run_ssn,
}


def run_baseline(obj, cfg: BaselineConfig, f_star=0.0, callback=None, w0=None) -> Trace:
    return RUNNERS[cfg.method](obj, cfg, f_star=f_star, callback=callback, w0=w0)
