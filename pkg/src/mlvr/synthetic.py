"""Seeded synthetic binary-classification instances."""

from __future__ import annotations

import numpy as np

from .data import SparseDataset


def make_logistic(
    n_samples: int,
    n_features: int,
    scale_span: float = 1.0,
    n_scaled: int | None = None,
    density: float = 1.0,
    seed: int = 0,
) -> SparseDataset:
    """Gaussian features, a few of them on a much larger scale.

    The first ``n_scaled`` columns (all of them by default) get scales
    log-spaced from ``scale_span`` down towards 1; the others keep unit
    scale. Few large columns on a unit bulk mimics unnormalized LIBSVM data:
    the Hessian has a handful of outlying eigenvalues, which cripples
    fixed-step stochastic methods but costs CG only a few iterations.

    Labels come from a logistic model whose weights are normalized per
    column, so every feature carries signal and the data is not separable.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_samples, n_features))
    if density < 1.0:
        X *= rng.random((n_samples, n_features)) < density
    k = n_features if n_scaled is None else n_scaled
    scales = np.ones(n_features)
    scales[:k] = np.logspace(np.log10(scale_span), 0.0, k + 1)[:k]
    X *= scales
    w_true = rng.standard_normal(n_features) / np.sqrt(n_features)
    col_mag = np.maximum(np.abs(X).mean(axis=0), 1e-12)
    p = 1.0 / (1.0 + np.exp(-(X @ (w_true / col_mag))))
    y = np.where(rng.random(n_samples) < p, 1.0, -1.0)
    return SparseDataset.from_dense(X, y, name=f"synthetic-{n_samples}x{n_features}")
