"""Gradient-based training for the neural mapping architectures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..core import TrialTensor
from ..prep import zscore_channels
from .forward import store_from_state_dict
from .nets import build_module
from .spec import MappingKind, MappingSpec, TrainedMapping


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 8
    max_epochs: int = 200
    patience: int = 20


def combined_loss_torch(yhat: torch.Tensor, y: torch.Tensor, lam: float) -> torch.Tensor:
    """Differentiable MSE + lam * (1 - mean per-channel Pearson r)."""
    mse = torch.mean((yhat - y) ** 2)
    a = yhat - yhat.mean(dim=-1, keepdim=True)
    b = y - y.mean(dim=-1, keepdim=True)
    denom = torch.sqrt((a * a).sum(dim=-1) * (b * b).sum(dim=-1))
    r = (a * b).sum(dim=-1) / torch.clamp(denom, min=1e-30)
    r = torch.where(denom > 1e-30, r, torch.zeros_like(r))
    return mse + lam * (1.0 - r.mean())


def _stack(pairs) -> tuple[torch.Tensor, torch.Tensor]:
    xs = np.stack([zscore_channels(x.data) for x, _ in pairs])
    ys = np.stack([zscore_channels(y.data) for _, y in pairs])
    return torch.as_tensor(xs), torch.as_tensor(ys)


def _round_trip_f32(state: dict) -> dict:
    """Quantize float tensors through float32 so in-memory predictions are
    bitwise identical to predictions from a persisted checkpoint."""
    out = {}
    for k, v in state.items():
        if v.is_floating_point():
            out[k] = v.detach().to(torch.float32).to(torch.float64)
        else:
            out[k] = v.detach().clone()
    return out


def train_mapping(
    spec: MappingSpec,
    train_pairs: list[tuple[TrialTensor, TrialTensor]],
    val_pairs: list[tuple[TrialTensor, TrialTensor]],
    optim_cfg: OptimConfig = OptimConfig(),
    seed: int = 0,
) -> TrainedMapping:
    """Minimize the combined loss with AdamW; early stopping on validation
    loss; deterministic given the seed (returns the best-validation state)."""
    if spec.kind is MappingKind.LINEAR_LAG:
        raise ValueError("linear_lag is fitted in closed form; use fit_linear_lag")
    if not train_pairs:
        raise ValueError("need at least one training pair")

    x_train, y_train = _stack(train_pairs)
    monitor_on_val = bool(val_pairs)
    if monitor_on_val:
        x_val, y_val = _stack(val_pairs)

    module = build_module(spec, seed=seed)
    optimizer = torch.optim.AdamW(module.parameters(), lr=optim_cfg.lr,
                                  weight_decay=optim_cfg.weight_decay)
    rng = np.random.default_rng(seed)

    def eval_loss(x, y) -> float:
        module.eval()
        with torch.no_grad():
            total, count = 0.0, 0
            for i in range(0, len(x), optim_cfg.batch_size):
                xb, yb = x[i:i + optim_cfg.batch_size], y[i:i + optim_cfg.batch_size]
                total += float(combined_loss_torch(module(xb), yb, spec.lam)) * len(xb)
                count += len(xb)
        return total / count

    best_state = _round_trip_f32(module.state_dict())
    best_loss = eval_loss(*(x_val, y_val) if monitor_on_val else (x_train, y_train))
    best_epoch = -1
    since_best = 0
    history = []

    for epoch in range(optim_cfg.max_epochs):
        module.train()
        order = rng.permutation(len(x_train))
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, len(order), optim_cfg.batch_size):
            idx = order[start:start + optim_cfg.batch_size]
            optimizer.zero_grad()
            loss = combined_loss_torch(module(x_train[idx]), y_train[idx], spec.lam)
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}, "
                    f"lr {optimizer.param_groups[0]['lr']:g}"
                )
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            n_batches += 1
        monitor = eval_loss(*(x_val, y_val) if monitor_on_val else (x_train, y_train))
        history.append({"epoch": epoch, "train_loss": epoch_loss / n_batches,
                        "monitor_loss": monitor})
        if monitor < best_loss:
            best_loss = monitor
            best_state = _round_trip_f32(module.state_dict())
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > optim_cfg.patience:
                break

    meta = {
        "seed": seed,
        "epochs_run": len(history),
        "best_epoch": best_epoch,
        "best_monitor_loss": best_loss,
        "monitored": "val" if monitor_on_val else "train",
        "history": history,
    }
    return TrainedMapping(spec, store_from_state_dict(best_state), meta)
