"""Deterministic signal transformations shared by training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TrialTensor, WordEvent


@dataclass(frozen=True)
class LagSpec:
    """Symmetric lag window for lagged-feature construction."""

    delta_s: float = 0.1
    sample_rate_hz: float = 100.0

    @property
    def max_lag(self) -> int:
        return int(round(self.delta_s * self.sample_rate_hz))

    @property
    def n_lags(self) -> int:
        return 2 * self.max_lag + 1

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.max_lag, self.max_lag + 1)


@dataclass(frozen=True)
class WordWindowSpec:
    pre_s: float = 0.2
    post_s: float = 0.8

    def __post_init__(self):
        if self.pre_s < 0 or self.post_s < 0:
            raise ValueError("window extents must be nonnegative")
        if self.pre_s + self.post_s <= 0:
            raise ValueError("window must have positive length")

    def n_samples(self, sample_rate_hz: float) -> int:
        return int(round((self.pre_s + self.post_s) * sample_rate_hz))


def zscore_channels(data: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-sd per channel (population sd); constant channels map to zeros."""
    data = np.asarray(data, dtype=np.float64)
    mean = data.mean(axis=-1, keepdims=True)
    sd = data.std(axis=-1, keepdims=True)
    out = data - mean
    constant = sd[..., 0] < 1e-15
    sd = np.where(sd < 1e-15, 1.0, sd)
    out /= sd
    out[constant, :] = 0.0
    return out


def zscore_per_channel(x: TrialTensor) -> TrialTensor:
    return TrialTensor(zscore_channels(x.data), x.sample_rate_hz, x.trial_id)


def build_lag_matrix(data: np.ndarray, spec: LagSpec) -> np.ndarray:
    """Concatenate time-shifted copies of each channel, shape [T x C*n_lags].

    Column block j (for lag l_j) holds x[c, t - l_j]; out-of-range samples are
    zero-padded so the row count stays exactly T.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("expected [C x T] data")
    n_ch, n_t = data.shape
    out = np.zeros((n_t, n_ch * spec.n_lags), dtype=np.float64)
    for j, lag in enumerate(spec.lags):
        block = out[:, j * n_ch:(j + 1) * n_ch]
        if lag == 0:
            block[:] = data.T
        elif lag > 0:
            block[lag:, :] = data[:, :-lag].T
        else:
            block[:lag, :] = data[:, -lag:].T
    return out


def extract_word_windows(
    trial: TrialTensor,
    events: list[WordEvent] | tuple[WordEvent, ...],
    spec: WordWindowSpec = WordWindowSpec(),
) -> tuple[list[tuple[np.ndarray, str]], list[tuple[WordEvent, str]]]:
    """Cut [C x W] windows around word onsets.

    Returns (windows, skipped) where each skipped entry records the offending
    event and the reason it was dropped.
    """
    fs = trial.sample_rate_hz
    width = spec.n_samples(fs)
    windows: list[tuple[np.ndarray, str]] = []
    skipped: list[tuple[WordEvent, str]] = []
    for e in events:
        start = int(round((e.onset_s - spec.pre_s) * fs))
        if start < 0:
            skipped.append((e, f"window starts {start / fs:.3f}s before trial start"))
            continue
        if start + width > trial.n_samples:
            skipped.append((e, "window extends past trial end"))
            continue
        windows.append((trial.data[:, start:start + width], e.word))
    return windows, skipped


def screen_dead_channels(x: TrialTensor, var_threshold: float = 1e-12) -> np.ndarray:
    """Boolean mask, True where a channel's variance falls below the threshold."""
    return x.data.var(axis=1) < var_threshold
