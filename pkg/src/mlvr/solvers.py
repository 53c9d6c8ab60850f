"""Matrix-free conjugate gradient and Armijo backtracking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CgBreakdown, LineSearchError, NotDescentError, NumericalError


@dataclass(frozen=True)
class CgConfig:
    max_iters: int = 10
    rel_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be >= 0")


@dataclass(frozen=True)
class LineSearchConfig:
    init_step: float = 1.0
    armijo_c: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.init_step <= 0:
            raise ValueError("init_step must be positive")


def cg_solve(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    cfg: CgConfig = CgConfig(),
) -> np.ndarray:
    """Approximately solve ``A x = b`` for SPD ``A`` given only ``v -> A v``.

    Starts from ``x = 0`` and stops after ``cfg.max_iters`` products, on an
    exactly zero residual, or once ``||r|| <= rel_tol * ||b||``. Work is
    charged by ``apply_A`` itself.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    r = b.copy()
    rr = float(r @ r)
    stop = cfg.rel_tol**2 * rr
    if rr == 0.0:
        return x
    p = r.copy()
    for _ in range(cfg.max_iters):
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp):
            raise NumericalError("non-finite value in CG")
        if pAp <= 0.0:
            raise CgBreakdown(f"<p, Ap> = {pAp:.3e} <= 0; operator not positive definite")
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        if rr_new == 0.0 or rr_new <= stop:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def backtracking_line_search(
    f: Callable[[np.ndarray], float],
    w: np.ndarray,
    p: np.ndarray,
    g: np.ndarray,
    cfg: LineSearchConfig = LineSearchConfig(),
    f0: float | None = None,
) -> float:
    """Largest ``init_step * shrink**k`` passing the Armijo test.

    Raises :class:`NotDescentError` unless ``<g, p> < 0`` and
    :class:`LineSearchError` after ``max_backtracks`` rejected trials; the
    latter carries the last trial step for callers that want to fall back.
    """
    slope = float(g @ p)
    if not slope < 0:
        raise NotDescentError(f"<g, p> = {slope:.3e} is not negative")
    if f0 is None:
        f0 = f(w)
    alpha = cfg.init_step
    for _ in range(cfg.max_backtracks + 1):
        ft = f(w + alpha * p)
        if ft <= f0 + cfg.armijo_c * alpha * slope:
            return alpha
        alpha *= cfg.shrink
    raise LineSearchError(
        f"Armijo condition not met after {cfg.max_backtracks} backtracks",
        last_step=alpha / cfg.shrink,
    )
