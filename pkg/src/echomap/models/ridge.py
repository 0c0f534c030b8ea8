"""Closed-form lagged ridge regression for the linear mapping."""

from __future__ import annotations

import numpy as np

from ..core import ParameterStore, TrialTensor
from ..prep import LagSpec, build_lag_matrix, zscore_channels
from .losses import pearson_per_channel
from .spec import MappingKind, MappingSpec, TrainedMapping

DEFAULT_ALPHA_GRID = tuple(10.0 ** e for e in range(-2, 7))


def _solve(gram: np.ndarray, cross: np.ndarray, alpha: float) -> tuple[np.ndarray, bool]:
    a = gram + alpha * np.eye(gram.shape[0])
    try:
        return np.linalg.solve(a, cross), False
    except np.linalg.LinAlgError:
        return np.linalg.pinv(a) @ cross, True


def fit_linear_lag(
    pairs: list[tuple[TrialTensor, TrialTensor]],
    lagspec: LagSpec = LagSpec(),
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    k_folds: int = 5,
    lam: float = 0.5,
) -> TrainedMapping:
    """Fit W = (X_lag^T X_lag + alpha I)^-1 X_lag^T Y over all training pairs.

    alpha is chosen from alpha_grid by k-fold cross-validation over trials,
    maximizing mean held-out per-channel Pearson r.  Inputs and targets are
    z-scored per channel per trial before fitting.
    """
    if not pairs:
        raise ValueError("need at least one training pair")
    n_ch = pairs[0][0].n_channels
    xs = [build_lag_matrix(zscore_channels(x.data), lagspec) for x, _ in pairs]
    ys = [zscore_channels(y.data).T for _, y in pairs]

    n = len(pairs)
    k = max(1, min(k_folds, n))
    folds = [list(range(i, n, k)) for i in range(k)]

    fold_gram = [sum(xs[i].T @ xs[i] for i in fold) for fold in folds]
    fold_cross = [sum(xs[i].T @ ys[i] for i in fold) for fold in folds]
    total_gram = sum(fold_gram)
    total_cross = sum(fold_cross)

    cv_table = []
    best_alpha = alpha_grid[0]
    best_score = -np.inf
    if len(alpha_grid) > 1 and k > 1:
        for alpha in alpha_grid:
            scores = []
            for f, fold in enumerate(folds):
                w, _ = _solve(total_gram - fold_gram[f], total_cross - fold_cross[f], alpha)
                for i in fold:
                    scores.append(pearson_per_channel((xs[i] @ w).T, ys[i].T).mean())
            score = float(np.mean(scores))
            cv_table.append({"alpha": alpha, "mean_val_r": score})
            if score > best_score:
                best_score, best_alpha = score, alpha
    else:
        best_alpha = alpha_grid[0]

    weights, used_pinv = _solve(total_gram, total_cross, best_alpha)
    # match the on-disk precision so persisted models predict identically
    weights = weights.astype(np.float32).astype(np.float64)
    spec = MappingSpec(kind=MappingKind.LINEAR_LAG, n_channels=n_ch, lam=lam, lag=lagspec)
    meta = {
        "alpha": best_alpha,
        "cv": cv_table,
        "pseudo_inverse": used_pinv,
        "n_train_pairs": n,
    }
    return TrainedMapping(spec, ParameterStore({"weights": weights}), meta)
