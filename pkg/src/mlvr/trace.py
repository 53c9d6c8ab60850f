"""Convergence traces and the shared stop rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DivergenceError
from .objective import EvalCounter

CSV_HEADER = "grad_calls,loss_diff"
ROUNDING_SLACK = 1e-12

CONVERGED = "converged"
BUDGET = "budget"
DIVERGED = "diverged"


@dataclass
class Trace:
    records: list[tuple[float, float]] = field(default_factory=list)
    method: str = ""
    dataset: str = ""
    seed: int | None = None
    config_digest: str = ""
    status: str = ""
    w: np.ndarray | None = None
    info: dict = field(default_factory=dict, repr=False)

    @property
    def costs(self) -> list[float]:
        return [c for c, _ in self.records]

    @property
    def gaps(self) -> list[float]:
        return [g for _, g in self.records]

    @property
    def final_cost(self) -> float:
        return self.records[-1][0]

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines += [f"{float(c)!r},{float(g)!r}" for c, g in self.records]
        return "\n".join(lines) + "\n"


def write_csv(trace: Trace, path) -> None:
    Path(path).write_text(trace.to_csv())


def parse_csv(text: str) -> list[tuple[float, float]]:
    """Parse ``grad_calls,loss_diff`` rows."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    out = []
    for line in lines[1:]:
        if line.strip():
            c, g = line.split(",")
            out.append((float(c), float(g)))
    return out


def read_csv(path) -> list[tuple[float, float]]:
    return parse_csv(Path(path).read_text())


class Monitor:
    """Records ``(effective grads, F(w) - F*)`` and decides when to stop.

    A record whose cost would exceed ``budget`` is dropped, so the trace
    never reports work beyond the budget. Loss evaluations here are not
    charged to the counter.
    """

    def __init__(
        self,
        loss: Callable[[np.ndarray], float],
        counter: EvalCounter,
        f_star: float = 0.0,
        tol: float = 1e-9,
        budget: float = float("inf"),
        callback: Callable[[np.ndarray], None] | None = None,
        trace: Trace | None = None,
    ):
        self.loss = loss
        self.counter = counter
        self.f_star = f_star
        self.tol = tol
        self.budget = budget
        self.callback = callback
        self.trace = trace if trace is not None else Trace()

    def record(self, w: np.ndarray) -> bool:
        """Log the iterate; return True when the run should stop."""
        cost = self.counter.effective_grads
        if cost > self.budget:
            self.trace.status = BUDGET
            return True
        if not np.all(np.isfinite(w)):
            self.trace.status = DIVERGED
            raise DivergenceError("non-finite iterate", self.trace)
        gap = self.loss(w) - self.f_star
        if not np.isfinite(gap):
            self.trace.status = DIVERGED
            raise DivergenceError("non-finite loss", self.trace)
        self.trace.records.append((cost, gap))
        self.trace.w = w.copy()
        if self.callback is not None:
            self.callback(w)
        if gap < self.tol:
            self.trace.status = CONVERGED
            return True
        if cost >= self.budget:
            self.trace.status = BUDGET
            return True
        return False
