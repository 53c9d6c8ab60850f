"""Multilevel variance-reduced training over a sample-coarsened hierarchy.

Levels are numbered 1 (coarsest) to L (full data). Parameters live in the
same space on every level, so restriction and prolongation are the identity
and iterates are handed between levels unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import SampleHierarchy, SparseDataset, build_hierarchy, validate_level_sizes
from .errors import ConfigError, ConsistencyError, LineSearchError, NotDescentError
from .objective import CoupledObjective, EvalCounter, LogisticObjective, make_coupled
from .solvers import CgConfig, LineSearchConfig, backtracking_line_search, cg_solve
from .trace import Monitor, Trace

OPTIMIZERS = ("gd", "gd-ls", "newton", "newton-ls", "sgd")
RESAMPLE_MODES = ("per-cycle", "frozen")
MAX_ULPS = 4


@dataclass(frozen=True)
class LevelConfig:
    """V-cycle settings.

    Optimizer kinds: ``gd``/``newton`` take fixed steps of ``step_size``,
    the ``-ls`` variants pick the step by backtracking, ``sgd`` takes
    single-sample steps of ``step_size``. The defaults are one line-searched
    GD step per fine level and one Newton step (10 CG iterations) on the
    coarsest level.
    """

    pre_steps: int = 1
    post_steps: int = 0
    coarse_steps: int = 1
    fine_optimizer: str = "gd-ls"
    coarse_optimizer: str = "newton-ls"
    step_size: float = 1.0
    correction_line_search: bool = True
    resample: str = "per-cycle"
    cg: CgConfig = field(default_factory=CgConfig)
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    check_consistency: bool = False

    def __post_init__(self):
        for name in ("fine_optimizer", "coarse_optimizer"):
            if getattr(self, name) not in OPTIMIZERS:
                raise ConfigError(f"{name} must be one of {OPTIMIZERS}")
        if self.resample not in RESAMPLE_MODES:
            raise ConfigError(f"resample must be one of {RESAMPLE_MODES}")
        if min(self.pre_steps, self.post_steps) < 0:
            raise ConfigError("smoothing step counts must be >= 0")
        if self.coarse_steps < 1:
            raise ConfigError("coarse_steps must be >= 1")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")


def ssn_config(cg: CgConfig = CgConfig(), resample: str = "per-cycle") -> LevelConfig:
    """Two-level settings under which a V-cycle is one sub-sampled Newton step.

    No smoothing; the coarse Newton step is taken in full and the fine-level
    line search along the correction supplies the step length.
    """
    return LevelConfig(
        pre_steps=0,
        post_steps=0,
        coarse_steps=1,
        coarse_optimizer="newton",
        step_size=1.0,
        correction_line_search=True,
        resample=resample,
        cg=cg,
    )


def svrg_config(step_size: float, inner_iters: int) -> LevelConfig:
    """Settings under which a V-cycle over levels ``(n, n)`` is one SVRG epoch."""
    return LevelConfig(
        pre_steps=0,
        post_steps=0,
        coarse_steps=inner_iters,
        coarse_optimizer="sgd",
        step_size=step_size,
        correction_line_search=False,
    )


@dataclass
class MlvrState:
    dataset: SparseDataset
    lam: float
    counter: EvalCounter
    rng: np.random.Generator
    hierarchy: SampleHierarchy | None = None
    level_objectives: list[LogisticObjective] = field(default_factory=list)
    # (level, max ulp distance) per coupled construction, filled when checking
    consistency_log: list[tuple[int, int]] = field(default_factory=list)
    # (level, coarse slope, fine slope) per coarse correction, filled when checking
    descent_log: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return self.hierarchy.n_levels

    def set_hierarchy(self, hierarchy: SampleHierarchy) -> None:
        self.hierarchy = hierarchy
        self.level_objectives = [
            LogisticObjective(self.dataset, subset, self.lam, self.counter)
            for subset in hierarchy.levels
        ]


def ulp_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Number of representable doubles between ``a`` and ``b``, per component."""

    def ordered(x):
        i = np.asarray(x, dtype=np.float64).view(np.int64)
        return np.where(i < 0, np.int64(-(2**63)) - i, i)

    return np.abs(ordered(a) - ordered(b))


def _step_length(obj, w, g, p, kind: str, cfg: LevelConfig) -> float:
    if not kind.endswith("-ls"):
        return cfg.step_size
    try:
        return backtracking_line_search(obj.value, w, p, g, cfg.line_search)
    except NotDescentError:
        return 0.0
    except LineSearchError as exc:
        return exc.last_step


def _optimize(obj, w, max_it, kind, cfg, rng) -> tuple[np.ndarray, np.ndarray]:
    """Run the level optimizer; also return the sum of the steps taken.

    The step sum is the correction handed to the finer level. Summing the
    steps as taken, rather than subtracting start from end, keeps a single
    coarse step bit-identical to the direction the coarse solver produced.
    """
    disp = np.zeros_like(w)
    if max_it == 0:
        return w, disp
    if kind == "sgd":
        subset = obj.subset
        for t in rng.integers(len(subset), size=max_it):
            s = cfg.step_size * obj.sample_gradient(w, subset[t])
            w = w - s
            disp = disp - s
        return w, disp
    for _ in range(max_it):
        g = obj.gradient(w)
        if not np.any(g):
            break
        if kind.startswith("gd"):
            p = -g
        else:
            p = cg_solve(obj.hessian_operator(w), -g, cfg.cg)
        alpha = _step_length(obj, w, g, p, kind, cfg)
        if alpha == 0.0:
            break
        s = alpha * p
        w = w + s
        disp = disp + s
    return w, disp


def level_optimizer(
    obj,
    w: np.ndarray,
    max_it: int,
    kind: str,
    cfg: LevelConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Apply ``max_it`` steps of the chosen update to ``obj`` starting at ``w``."""
    return _optimize(obj, w, max_it, kind, cfg, rng)[0]


def _check_anchor(state: MlvrState, level: int, coupled: CoupledObjective) -> None:
    with state.counter.suspended():
        g = coupled.gradient(coupled.anchor)
    ulps = int(ulp_distance(g, coupled.fine_grad).max())
    state.consistency_log.append((level, ulps))
    if ulps > MAX_ULPS:
        raise ConsistencyError(
            f"level {level}: coupled gradient at anchor is {ulps} ulps off"
        )


def _coarse_correction(state, level, obj, anchor, g, w_coarse, p, coarse_obj, cfg):
    """Apply the coarse correction ``p`` at ``anchor``; return the iterate and step."""
    none = np.zeros_like(anchor)
    if not np.any(p):
        return anchor, none
    slope = float(g @ p)
    if cfg.check_consistency:
        with state.counter.suspended():
            coarse_slope = float(coarse_obj.gradient(anchor) @ p)
        state.descent_log.append((level, coarse_slope, slope))
        if coarse_slope < 0 and not slope < 0:
            raise ConsistencyError(f"level {level}: coarse descent lost on transfer")
    if not cfg.correction_line_search:
        return w_coarse, p
    if not slope < 0:
        return anchor, none
    try:
        alpha = backtracking_line_search(obj.value, anchor, p, g, cfg.line_search)
    except LineSearchError as exc:
        alpha = exc.last_step
    if alpha == 1.0:
        return w_coarse, p
    s = alpha * p
    return anchor + s, s


def v_cycle(
    level: int,
    w: np.ndarray,
    fine_grad: np.ndarray | None,
    state: MlvrState,
    cfg: LevelConfig,
) -> np.ndarray:
    """One V-cycle entered at ``level`` (1-based), returning the new iterate.

    ``fine_grad`` is the finer level's gradient at ``w``; it defines the
    coupling of this level's surrogate and must be ``None`` on the finest
    level.
    """
    if (level == state.n_levels) != (fine_grad is None):
        raise ValueError("fine_grad must be None exactly on the finest level")
    obj = make_coupled(state.level_objectives[level - 1], fine_grad, w)
    if cfg.check_consistency and obj.coupled:
        _check_anchor(state, level, obj)
    return _cycle(level, obj, w, state, cfg)[0]


def _cycle(level, obj, w, state: MlvrState, cfg: LevelConfig):
    if level == 1:
        return _optimize(obj, w, cfg.coarse_steps, cfg.coarse_optimizer, cfg, state.rng)

    # downward: pre-smooth, then couple the next coarser level at the result
    anchor, d_pre = _optimize(obj, w, cfg.pre_steps, cfg.fine_optimizer, cfg, state.rng)
    g = obj.gradient(anchor)
    coarse_base = state.level_objectives[level - 2]
    # same sample set as this level: grad F^{l-1}(anchor) is the base part of g
    reuse = None
    if len(coarse_base.subset) == len(obj.subset) and not obj.coupled:
        reuse = g
    coarse = make_coupled(coarse_base, g, anchor, reuse)
    if cfg.check_consistency:
        _check_anchor(state, level - 1, coarse)
    w_coarse, e = _cycle(level - 1, coarse, anchor, state, cfg)

    # upward: identity prolongation of the correction, then post-smooth
    w, d_corr = _coarse_correction(state, level, obj, anchor, g, w_coarse, e, coarse, cfg)
    w, d_post = _optimize(obj, w, cfg.post_steps, cfg.fine_optimizer, cfg, state.rng)
    return w, d_pre + d_corr + d_post


def train_mlvr(
    dataset: SparseDataset,
    level_sizes: Sequence[int],
    cfg: LevelConfig = LevelConfig(),
    tol: float = 1e-9,
    budget: float = 100.0,
    seed: int = 0,
    f_star: float = 0.0,
    lam: float | None = None,
    callback: Callable[[np.ndarray], None] | None = None,
    w0: np.ndarray | None = None,
) -> Trace:
    """Repeat V-cycles from the finest level until the loss gap drops below ``tol``.

    The hierarchy is redrawn before every cycle (``resample="per-cycle"``) or
    drawn once (``"frozen"``), in both cases from the run's generator.
    """
    sizes = validate_level_sizes(level_sizes, dataset.n_samples)
    lam = 1.0 / dataset.n_samples if lam is None else lam
    counter = EvalCounter(dataset.n_samples)
    rng = np.random.default_rng(seed)
    state = MlvrState(dataset, lam, counter, rng)
    loss = LogisticObjective(dataset, None, lam).value
    mon = Monitor(loss, counter, f_star, tol, budget, callback)
    mon.trace.method = f"mlvr{len(sizes)}"
    mon.trace.dataset = dataset.name
    mon.trace.seed = seed
    mon.trace.info["state"] = state

    if cfg.resample == "frozen":
        state.set_hierarchy(build_hierarchy(dataset.n_samples, sizes, rng))
    w = np.zeros(dataset.n_features) if w0 is None else np.array(w0, dtype=np.float64)
    stop = mon.record(w)
    while not stop:
        if cfg.resample == "per-cycle":
            state.set_hierarchy(build_hierarchy(dataset.n_samples, sizes, rng))
        w = v_cycle(len(sizes), w, None, state, cfg)
        stop = mon.record(w)
    return mon.trace
