"""Inference for trained mappings (linear and neural)."""

from __future__ import annotations

import numpy as np
import torch

from ..core import ParameterStore, TrialTensor
from ..prep import build_lag_matrix
from .nets import build_module
from .spec import MappingKind, MappingSpec, TrainedMapping

_FLOAT_KINDS = "f"


def store_from_state_dict(state) -> ParameterStore:
    return ParameterStore({k: v.detach().cpu().numpy().copy() for k, v in state.items()})


def module_from_store(spec: MappingSpec, store: ParameterStore):
    module = build_module(spec, seed=0)
    state = {}
    for name, arr in store:
        ref = module.state_dict()[name]
        state[name] = torch.as_tensor(arr).to(ref.dtype).reshape(ref.shape)
    module.load_state_dict(state)
    module.eval()
    return module


def forward(model: TrainedMapping, x: TrialTensor | np.ndarray) -> np.ndarray:
    """Predict a listened trial [C x T] from an imagined trial.

    The input is expected to be z-scored per channel (not enforced here; the
    evaluation harness normalizes before calling).
    """
    data = x.data if isinstance(x, TrialTensor) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != model.spec.n_channels:
        raise ValueError(
            f"expected [{model.spec.n_channels} x T] input, got shape {data.shape}"
        )
    if model.spec.kind is MappingKind.LINEAR_LAG:
        return (build_lag_matrix(data, model.spec.lag) @ model.params["weights"]).T
    return forward_batch(model, data[None])[0]


def forward_batch(model: TrainedMapping, data: np.ndarray) -> np.ndarray:
    """Batched neural inference, [B x C x T] -> [B x C x T]."""
    if model.spec.kind is MappingKind.LINEAR_LAG:
        return np.stack([forward(model, trial) for trial in data])
    module = module_from_store(model.spec, model.params)
    with torch.no_grad():
        out = module(torch.as_tensor(np.asarray(data, dtype=np.float64)))
    return out.numpy()


def random_mapping(spec: MappingSpec, seed: int) -> TrainedMapping:
    """Untrained (randomly initialized) mapping, used as a garbage-in control."""
    if spec.kind is MappingKind.LINEAR_LAG:
        rng = np.random.default_rng(seed)
        d = spec.n_channels * spec.lag.n_lags
        w = rng.standard_normal((d, spec.n_channels)) / np.sqrt(d)
        return TrainedMapping(spec, ParameterStore({"weights": w}), {"random": True, "seed": seed})
    module = build_module(spec, seed=seed)
    return TrainedMapping(spec, store_from_state_dict(module.state_dict()),
                          {"random": True, "seed": seed})
