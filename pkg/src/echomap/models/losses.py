"""Training loss: MSE plus a mean per-channel correlation penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def pearson_per_channel(yhat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-channel Pearson r; channels where either signal is constant get r = 0."""
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch: {yhat.shape} vs {y.shape}")
    if y.shape[-1] < 2:
        raise ValueError("need at least 2 samples per channel")
    a = yhat - yhat.mean(axis=-1, keepdims=True)
    b = y - y.mean(axis=-1, keepdims=True)
    na = np.sqrt((a * a).sum(axis=-1))
    nb = np.sqrt((b * b).sum(axis=-1))
    denom = na * nb
    ok = denom > 1e-300
    r = np.zeros(y.shape[:-1], dtype=np.float64)
    r[ok] = (a * b).sum(axis=-1)[ok] / denom[ok]
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class CombinedLoss:
    total: float
    mse: float
    mean_r: float


def combined_loss(yhat: np.ndarray, y: np.ndarray, lam: float = 0.5) -> CombinedLoss:
    """loss = MSE(yhat, y) + lam * (1 - mean per-channel Pearson r)."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    yhat = np.asarray(yhat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch: {yhat.shape} vs {y.shape}")
    mse = float(np.mean((yhat - y) ** 2))
    mean_r = float(pearson_per_channel(yhat, y).mean())
    return CombinedLoss(mse + lam * (1.0 - mean_r), mse, mean_r)
