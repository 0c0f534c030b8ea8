"""Contrastive word decoder for listened neural windows.

A convolutional window encoder and a word-embedding projection head are
trained jointly with a symmetric temperature-scaled contrastive loss;
evaluation is rank-based retrieval against the full vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .core import EmbeddingTable, ParameterStore, RankOutcome, Vocabulary


@dataclass(frozen=True)
class DecoderSpec:
    embed_dim: int = 128
    temperature: float = 0.07
    spatial_width: int = 64
    dilations: tuple[int, ...] = (1, 2, 4)
    kernel: int = 3
    dropout: float = 0.1
    noise_aug_sd: float = 0.1     # relative to the training windows' sd
    lr: float = 3e-4
    weight_decay: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")


class WindowEncoder(nn.Module):
    """Spatial 1-D convolution across sensors, dilated temporal blocks,
    temporal mean pooling, projection to a unit-norm embedding."""

    def __init__(self, n_channels: int, spec: DecoderSpec):
        super().__init__()
        w = spec.spatial_width
        self.spatial = nn.Conv1d(n_channels, w, 1)
        blocks = []
        for d in spec.dilations:
            pad = d * (spec.kernel - 1) // 2
            blocks.append(nn.Sequential(
                nn.Conv1d(w, w, spec.kernel, padding=pad, dilation=d),
                nn.BatchNorm1d(w),
                nn.GELU(),
                nn.Dropout(spec.dropout),
            ))
        self.blocks = nn.ModuleList(blocks)
        self.proj = nn.Linear(w, spec.embed_dim)

    def forward(self, x):
        h = self.spatial(x)
        for block in self.blocks:
            h = block(h)
        return F.normalize(self.proj(h.mean(dim=-1)), dim=-1)


class WordProjector(nn.Module):
    """Two-layer projection head over frozen pretrained word vectors."""

    def __init__(self, input_dim: int, spec: DecoderSpec):
        super().__init__()
        self.fc1 = nn.Linear(input_dim, spec.embed_dim)
        self.fc2 = nn.Linear(spec.embed_dim, spec.embed_dim)

    def forward(self, v):
        return F.normalize(self.fc2(F.gelu(self.fc1(v))), dim=-1)


def nt_xent_torch(z_a: torch.Tensor, z_b: torch.Tensor, tau: float) -> torch.Tensor:
    logits = (z_a @ z_b.T) / tau
    labels = torch.arange(len(z_a), device=logits.device)
    return 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.T, labels))


def nt_xent(z_meg: np.ndarray, z_word: np.ndarray, tau: float = 0.07) -> float:
    """Symmetric temperature-scaled contrastive loss over in-batch pairs."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    z_meg = np.asarray(z_meg, dtype=np.float64)
    z_word = np.asarray(z_word, dtype=np.float64)
    if z_meg.shape != z_word.shape or z_meg.ndim != 2:
        raise ValueError("expected two [B x d] arrays of equal shape")
    with torch.no_grad():
        return float(nt_xent_torch(torch.as_tensor(z_meg), torch.as_tensor(z_word), tau))


@dataclass
class TrainedDecoder:
    spec: DecoderSpec
    n_channels: int
    window_samples: int
    encoder_params: ParameterStore
    projector_params: ParameterStore
    table: EmbeddingTable
    vocab: Vocabulary
    cache: np.ndarray             # [V x embed_dim], row i = vocabulary word i
    meta: dict = field(default_factory=dict)

    @property
    def training_subjects(self) -> tuple[str, ...]:
        return tuple(self.meta.get("training_subjects", ()))


def _store(module: nn.Module) -> ParameterStore:
    return ParameterStore({k: v.detach().numpy().copy() for k, v in module.state_dict().items()})


def _load(module: nn.Module, store: ParameterStore) -> nn.Module:
    ref = module.state_dict()
    module.load_state_dict({k: torch.as_tensor(a).to(ref[k].dtype).reshape(ref[k].shape)
                            for k, a in store})
    module.eval()
    return module


def _round_trip_f32(module: nn.Module) -> dict:
    out = {}
    for k, v in module.state_dict().items():
        out[k] = v.detach().to(torch.float32).to(torch.float64) if v.is_floating_point() \
            else v.detach().clone()
    return out


def _stratified_split(words: list[str], val_fraction: float, seed: int):
    by_word: dict[str, list[int]] = {}
    for i, w in enumerate(words):
        by_word.setdefault(w, []).append(i)
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for w in sorted(by_word):
        idx = np.array(by_word[w])
        rng.shuffle(idx)
        n_val = int(round(val_fraction * len(idx)))
        if len(idx) >= 2:
            n_val = max(1, n_val)
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return sorted(train_idx), sorted(val_idx)


def train_decoder(windows: np.ndarray, words: list[str], table: EmbeddingTable,
                  vocab: Vocabulary, spec: DecoderSpec = DecoderSpec(),
                  seed: int = 0, training_subjects: tuple[str, ...] = ()) -> TrainedDecoder:
    """Jointly train the window encoder and word projection head.

    windows: [N x C x W] listened-condition windows, words: their labels.
    Deterministic per seed; early stopping on the validation contrastive loss.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3 or len(windows) != len(words):
        raise ValueError("expected [N x C x W] windows with one word per window")
    missing = sorted({w for w in words if w not in table})
    if missing:
        raise KeyError(f"words missing from embedding table: {missing[:5]}")

    n, n_ch, width = windows.shape
    torch.manual_seed(seed)
    encoder = WindowEncoder(n_ch, spec).double()
    projector = WordProjector(table.dim, spec).double()
    params = list(encoder.parameters()) + list(projector.parameters())
    optimizer = torch.optim.AdamW(params, lr=spec.lr, weight_decay=spec.weight_decay)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=spec.max_epochs)

    word_vecs = np.stack([table.vectors[w] for w in words])
    x_all = torch.as_tensor(windows)
    v_all = torch.as_tensor(word_vecs)
    train_idx, val_idx = _stratified_split(list(words), spec.val_fraction,
                                           np.random.SeedSequence([seed, 11]).generate_state(1)[0])
    aug_sd = spec.noise_aug_sd * float(windows[train_idx].std()) if train_idx else 0.0
    rng = np.random.default_rng(np.random.SeedSequence([seed, 12]).generate_state(1)[0])

    def eval_loss(idx) -> float:
        if not idx:
            return float("nan")
        encoder.eval(); projector.eval()
        with torch.no_grad():
            total = 0.0
            for s in range(0, len(idx), spec.batch_size):
                batch = idx[s:s + spec.batch_size]
                loss = nt_xent_torch(encoder(x_all[batch]), projector(v_all[batch]),
                                     spec.temperature)
                total += float(loss) * len(batch)
        return total / len(idx)

    monitor_idx = val_idx if val_idx else train_idx
    best = (eval_loss(monitor_idx), _round_trip_f32(encoder), _round_trip_f32(projector), -1)
    history = [{"epoch": -1, "val_loss": best[0]}]
    since_best = 0
    for epoch in range(spec.max_epochs):
        encoder.train(); projector.train()
        order = rng.permutation(len(train_idx))
        epoch_loss, n_batches = 0.0, 0
        for s in range(0, len(order), spec.batch_size):
            batch = [train_idx[j] for j in order[s:s + spec.batch_size]]
            if len(batch) < 2:
                continue
            xb = x_all[batch]
            if aug_sd > 0:
                xb = xb + torch.as_tensor(rng.standard_normal(tuple(xb.shape)) * aug_sd)
            optimizer.zero_grad()
            loss = nt_xent_torch(encoder(xb), projector(v_all[batch]), spec.temperature)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite decoder loss at epoch {epoch}, "
                                   f"lr {optimizer.param_groups[0]['lr']:g}")
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            n_batches += 1
        scheduler.step()
        val = eval_loss(monitor_idx)
        history.append({"epoch": epoch, "train_loss": epoch_loss / max(1, n_batches),
                        "val_loss": val})
        if val < best[0]:
            best = (val, _round_trip_f32(encoder), _round_trip_f32(projector), epoch)
            since_best = 0
        else:
            since_best += 1
            if since_best > spec.patience:
                break

    encoder.load_state_dict(best[1])
    projector.load_state_dict(best[2])
    encoder.eval(); projector.eval()
    with torch.no_grad():
        cache = projector(torch.as_tensor(table.matrix(vocab))).numpy()
    # match the on-disk precision so persisted decoders retrieve identically
    cache = cache.astype(np.float32).astype(np.float64)
    meta = {
        "seed": seed,
        "best_epoch": best[3],
        "best_val_loss": best[0],
        "epochs_run": len(history) - 1,
        "history": history,
        "encoder_name": table.encoder_name,
        "training_subjects": list(training_subjects),
        "n_train_windows": len(train_idx),
        "n_val_windows": len(val_idx),
    }
    return TrainedDecoder(spec, n_ch, width,
                          ParameterStore({k: v.numpy().copy() for k, v in best[1].items()}),
                          ParameterStore({k: v.numpy().copy() for k, v in best[2].items()}),
                          table, vocab, cache, meta)


def _encoder_module(decoder: TrainedDecoder) -> WindowEncoder:
    module = WindowEncoder(decoder.n_channels, decoder.spec).double()
    return _load(module, decoder.encoder_params)


def meg_encode(decoder: TrainedDecoder, windows: np.ndarray) -> np.ndarray:
    """Encode [N x C x W] (or a single [C x W]) window(s) to unit vectors."""
    windows = np.asarray(windows, dtype=np.float64)
    single = windows.ndim == 2
    if single:
        windows = windows[None]
    if windows.shape[1] != decoder.n_channels or windows.shape[2] != decoder.window_samples:
        raise ValueError(
            f"expected windows [{decoder.n_channels} x {decoder.window_samples}], "
            f"got {windows.shape[1:]}"
        )
    module = _encoder_module(decoder)
    with torch.no_grad():
        z = module(torch.as_tensor(windows)).numpy()
    return z[0] if single else z


def word_encode(decoder: TrainedDecoder, word: str) -> np.ndarray:
    """Projected embedding for a vocabulary word (from the frozen cache)."""
    return decoder.cache[decoder.vocab.index(word)]


def _rank_of(sims: np.ndarray, true_index: int) -> int:
    s = sims[true_index]
    greater = int(np.sum(sims > s))
    equal_before = int(np.sum(sims[:true_index] == s))
    return 1 + greater + equal_before


def rank_retrieve(decoder: TrainedDecoder, window: np.ndarray, true_word: str) -> RankOutcome:
    """Dot-product retrieval of one window against the cached vocabulary."""
    sims = decoder.cache @ meg_encode(decoder, window)
    return RankOutcome(true_word, _rank_of(sims, decoder.vocab.index(true_word)), sims)


def rank_retrieve_batch(decoder: TrainedDecoder, windows: np.ndarray,
                        true_words: list[str]) -> list[RankOutcome]:
    z = meg_encode(decoder, np.asarray(windows))
    sims_all = z @ decoder.cache.T
    return [
        RankOutcome(w, _rank_of(sims, decoder.vocab.index(w)), sims)
        for sims, w in zip(sims_all, true_words)
    ]


@dataclass(frozen=True)
class RankCurve:
    cdf: np.ndarray               # P(rank <= k) for k = 1..V
    recall_at: dict[int, float]
    n_outcomes: int

    @property
    def chance(self) -> np.ndarray:
        v = len(self.cdf)
        return np.arange(1, v + 1) / v


def rank_cdf(outcomes: list[RankOutcome], vocab_size: int,
             recall_ks: tuple[int, ...] = (1, 5, 10)) -> RankCurve:
    if not outcomes:
        raise ValueError("need at least one outcome")
    ranks = np.array([o.rank for o in outcomes])
    cdf = np.array([(ranks <= k).mean() for k in range(1, vocab_size + 1)])
    recall = {k: float(cdf[k - 1]) for k in recall_ks if k <= vocab_size}
    return RankCurve(cdf, recall, len(outcomes))


def top_k_words(outcomes_by_encoder: dict[str, list[RankOutcome]], k: int = 20,
                vocab: Vocabulary | None = None) -> tuple[list[str], list[str]]:
    """Best-decoded words: per word, median rank per encoder, then the median
    across encoders; the k lowest win (lexicographic tie-break).

    Returns (selected, excluded) where excluded lists vocabulary words with no
    outcomes under any encoder (empty when no vocabulary is supplied)."""
    per_word: dict[str, list[float]] = {}
    for outcomes in outcomes_by_encoder.values():
        ranks: dict[str, list[int]] = {}
        for o in outcomes:
            ranks.setdefault(o.true_word, []).append(o.rank)
        for w, rs in ranks.items():
            per_word.setdefault(w, []).append(float(np.median(rs)))
    scored = sorted((float(np.median(meds)), w) for w, meds in per_word.items())
    selected = [w for _, w in scored[:k]]
    excluded = [w for w in vocab if w not in per_word] if vocab is not None else []
    return selected, excluded
