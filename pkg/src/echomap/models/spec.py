"""Mapping model specification and trained-model container."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..core import ParameterStore
from ..prep import LagSpec


class MappingKind(Enum):
    LINEAR_LAG = "linear_lag"
    SHALLOW_MLP = "shallow_mlp"
    CNN1D = "cnn1d"
    UNET1D = "unet1d"
    RNN = "rnn"
    TCN = "tcn"
    TRANSFORMER = "transformer"


NEURAL_KINDS = tuple(k for k in MappingKind if k is not MappingKind.LINEAR_LAG)

# Default widths, chosen so trainable-parameter counts land on the
# per-architecture budgets at C=155 (see tests/test_nets.py).
_DEFAULT_HIDDEN = {
    MappingKind.SHALLOW_MLP: 78,
    MappingKind.CNN1D: 64,
    MappingKind.UNET1D: 21,   # base width; stages use (h, 2h, 4h)
    MappingKind.RNN: 58,      # concatenated hidden size; h/2 per direction
    MappingKind.TCN: 32,
    MappingKind.TRANSFORMER: 64,  # d_model
}


@dataclass(frozen=True)
class MappingSpec:
    kind: MappingKind
    n_channels: int = 155
    lam: float = 0.5
    dropout: float = 0.1
    hidden: int | None = None
    lag: LagSpec = field(default_factory=LagSpec)
    # transformer-only knobs
    n_layers: int = 3
    n_heads: int = 4
    ffn_dim: int = 128

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.n_channels < 1:
            raise ValueError("n_channels must be positive")

    @property
    def hidden_size(self) -> int:
        if self.kind is MappingKind.LINEAR_LAG:
            raise ValueError("linear_lag has no hidden size")
        return self.hidden if self.hidden is not None else _DEFAULT_HIDDEN[self.kind]


@dataclass
class TrainedMapping:
    spec: MappingSpec
    params: ParameterStore
    meta: dict = field(default_factory=dict)


def count_parameters(spec: MappingSpec) -> int:
    """Exact trainable parameter count for the instantiated architecture.

    For the lag regression this is the number of effective read-out
    coefficients, C * n_lags * C.
    """
    if spec.kind is MappingKind.LINEAR_LAG:
        return spec.n_channels * spec.lag.n_lags * spec.n_channels
    from .nets import build_module
    module = build_module(spec, seed=0)
    return sum(int(np.prod(p.shape)) for p in module.parameters() if p.requires_grad)
