"""Finite-sum objectives: regularized logistic loss and its coupled surrogates.

Every gradient or Hessian-vector product is charged to an :class:`EvalCounter`
in units of full-data gradient passes. Function values are free: they are
used for line searches and monitoring only.
"""

from __future__ import annotations

import dataclasses
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.special import expit

from .data import SparseDataset
from .errors import DimensionError


@dataclass
class EvalCounter:
    """Work counter. A pass over ``s`` samples costs ``s / n_full``.

    Stored as an integer sample count so the running total is exact.
    """

    n_full: int
    sample_evals: int = 0
    paused: bool = False

    def charge(self, n_samples: int) -> None:
        if not self.paused:
            self.sample_evals += int(n_samples)

    @contextmanager
    def suspended(self):
        """Evaluate without charging (instrumentation only)."""
        prev, self.paused = self.paused, True
        try:
            yield self
        finally:
            self.paused = prev

    @property
    def effective_grads(self) -> float:
        return self.sample_evals / self.n_full


class FiniteSumObjective(Protocol):
    subset: np.ndarray
    n_features: int
    n_total: int
    counter: EvalCounter | None

    def value(self, w: np.ndarray) -> float: ...

    def gradient(self, w: np.ndarray) -> np.ndarray: ...

    def sample_gradient(self, w: np.ndarray, i: int) -> np.ndarray: ...

    def hvp(self, w: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    def hessian_operator(self, w: np.ndarray) -> Callable[[np.ndarray], np.ndarray]: ...

    def with_counter(self, counter: EvalCounter | None) -> "FiniteSumObjective": ...

    def restrict(self, subset: np.ndarray) -> "FiniteSumObjective": ...


def _check_dim(name: str, v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (d,):
        raise DimensionError(f"{name} has shape {v.shape}, expected ({d},)")
    return v


@dataclass(eq=False)
class LogisticObjective:
    """``(1/|S|) sum_{i in S} log(1 + exp(-y_i <w, x_i>)) + (lam/2) ||w||^2``.

    ``lam`` defaults to ``1 / n`` with ``n`` the size of the whole dataset,
    not of ``subset``, so coarse surrogates share the fine regularizer.
    """

    dataset: SparseDataset
    subset: np.ndarray | None = None
    lam: float | None = None
    counter: EvalCounter | None = None
    _X: object = field(init=False, repr=False)
    _y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.dataset.n_samples
        full = np.arange(n, dtype=np.int64)
        if self.subset is None:
            self.subset = full
        self.subset = np.asarray(self.subset, dtype=np.int64)
        if self.subset.size == 0:
            raise ValueError("subset must be non-empty")
        if np.array_equal(self.subset, full):
            self._X = self.dataset.features
            self._y = self.dataset.labels
        else:
            self._X = self.dataset.features[self.subset]
            self._y = self.dataset.labels[self.subset]
        if self.lam is None:
            self.lam = 1.0 / n
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")

    @property
    def n_features(self) -> int:
        return self.dataset.n_features

    @property
    def sample_count(self) -> int:
        return self.subset.shape[0]

    @property
    def n_total(self) -> int:
        return self.dataset.n_samples

    def with_counter(self, counter: EvalCounter | None) -> "LogisticObjective":
        return dataclasses.replace(self, counter=counter)

    def restrict(self, subset) -> "LogisticObjective":
        """Same loss and counter over a subset of the samples."""
        return LogisticObjective(self.dataset, subset, self.lam, self.counter)

    def _charge(self, s: int) -> None:
        if self.counter is not None:
            self.counter.charge(s)

    def value(self, w) -> float:
        w = _check_dim("w", w, self.n_features)
        margins = self._y * (self._X @ w)
        loss = np.logaddexp(0.0, -margins).mean()
        return float(loss + 0.5 * self.lam * (w @ w))

    def gradient(self, w) -> np.ndarray:
        w = _check_dim("w", w, self.n_features)
        self._charge(self.sample_count)
        margins = self._y * (self._X @ w)
        coef = -self._y * expit(-margins) / self.sample_count
        return self._X.T @ coef + self.lam * w

    def sample_gradient(self, w, i: int) -> np.ndarray:
        """Gradient of the single term ``f_i`` (loss of sample ``i`` plus regularizer).

        ``i`` is a row of the underlying dataset, not a position in ``subset``.
        """
        self._charge(1)
        idx, vals = self.dataset.row(i)
        y = self.dataset.labels[i]
        coef = -y * expit(-y * (vals @ w[idx]))
        g = self.lam * w
        g[idx] += coef * vals
        return g

    def curvature_weights(self, w) -> np.ndarray:
        s = expit(self._X @ w)
        return s * (1.0 - s)

    def hessian_operator(self, w) -> Callable[[np.ndarray], np.ndarray]:
        """Matrix-free ``v -> H(w) v``; each application costs one pass over ``subset``."""
        w = _check_dim("w", w, self.n_features)
        weights = self.curvature_weights(w) / self.sample_count
        X, lam, d = self._X, self.lam, self.n_features

        def apply(v):
            v = _check_dim("v", v, d)
            self._charge(self.sample_count)
            return X.T @ (weights * (X @ v)) + lam * v

        return apply

    def hvp(self, w, v) -> np.ndarray:
        return self.hessian_operator(w)(v)


@dataclass(eq=False)
class CoupledObjective:
    """Sub-sampled surrogate tied to the finer level at ``anchor``.

    Represents ``F_sub(w) + <fine_grad - grad F_sub(anchor), w - anchor>``.
    The gradient is evaluated as ``fine_grad + (grad F_sub(w) - grad F_sub(anchor))``
    so that at the anchor it reproduces ``fine_grad`` bit for bit. With
    ``fine_grad=None`` there is no coupling and the object is ``base`` itself.
    """

    base: LogisticObjective
    anchor: np.ndarray
    fine_grad: np.ndarray | None = None
    anchor_grad: np.ndarray | None = None

    @property
    def subset(self) -> np.ndarray:
        return self.base.subset

    @property
    def n_features(self) -> int:
        return self.base.n_features

    @property
    def sample_count(self) -> int:
        return self.base.sample_count

    @property
    def counter(self) -> EvalCounter | None:
        return self.base.counter

    @property
    def coupled(self) -> bool:
        return self.fine_grad is not None

    @property
    def delta_g(self) -> np.ndarray:
        if self.fine_grad is None:
            return np.zeros(self.n_features)
        return self.fine_grad - self.anchor_grad

    def value(self, w) -> float:
        w = _check_dim("w", w, self.n_features)
        if self.fine_grad is None:
            return self.base.value(w)
        return self.base.value(w) + float(self.delta_g @ (w - self.anchor))

    def gradient(self, w) -> np.ndarray:
        if self.fine_grad is None:
            return self.base.gradient(w)
        return self.fine_grad + (self.base.gradient(w) - self.anchor_grad)

    def sample_gradient(self, w, i: int) -> np.ndarray:
        """Stochastic gradient from the per-sample split of the coupling.

        Each term ``f_i(w) + <fine_grad - grad f_i(anchor), w - anchor>``
        averages to the coupled objective over ``subset``; its gradient is the
        variance-reduced estimator ``grad f_i(w) - grad f_i(anchor) + fine_grad``.
        """
        if self.fine_grad is None:
            return self.base.sample_gradient(w, i)
        gi = self.base.sample_gradient(w, i)
        gi -= self.base.sample_gradient(self.anchor, i)
        return self.fine_grad + gi

    def hessian_operator(self, w):
        return self.base.hessian_operator(w)

    def hvp(self, w, v) -> np.ndarray:
        return self.base.hvp(w, v)


def make_coupled(
    base: LogisticObjective,
    fine_grad: np.ndarray | None,
    anchor: np.ndarray,
    anchor_grad: np.ndarray | None = None,
) -> CoupledObjective:
    """Build the level surrogate whose gradient at ``anchor`` equals ``fine_grad``.

    Pass ``fine_grad=None`` on the finest level, where the coupling vanishes.
    Costs one gradient of ``base`` when coupling is requested, unless the
    caller already holds ``grad base(anchor)`` and passes it as ``anchor_grad``.
    """
    anchor = _check_dim("anchor", anchor, base.n_features).copy()
    if fine_grad is None:
        return CoupledObjective(base, anchor)
    fine_grad = _check_dim("fine_grad", fine_grad, base.n_features).copy()
    if anchor_grad is None:
        anchor_grad = base.gradient(anchor)
    else:
        anchor_grad = _check_dim("anchor_grad", anchor_grad, base.n_features).copy()
    return CoupledObjective(base, anchor, fine_grad, anchor_grad)
