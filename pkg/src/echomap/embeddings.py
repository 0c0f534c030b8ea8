"""Synthetic embedding-table fixtures (stand-ins for pretrained encoders).

Real tables are produced externally and loaded from TSV (see ``echomap.io``);
these deterministic fixtures let every experiment run self-contained.
"""

from __future__ import annotations

import numpy as np

from .core import EmbeddingTable, Vocabulary

ENCODER_NAMES = ("semantic", "acoustic", "phonetic", "combined")

_BASE_DIMS = {"semantic": 48, "acoustic": 40, "phonetic": 16}


def make_synthetic_table(vocab: Vocabulary, encoder_name: str, seed: int = 0,
                         dim: int | None = None) -> EmbeddingTable:
    """Unit-norm Gaussian vectors per word; 'combined' concatenates the
    semantic and phonetic tables (dimension additivity)."""
    if encoder_name == "combined":
        sem = make_synthetic_table(vocab, "semantic", seed)
        pho = make_synthetic_table(vocab, "phonetic", seed)
        vectors = {w: np.concatenate([sem.vectors[w], pho.vectors[w]]) for w in vocab}
        return EmbeddingTable("combined", vectors)
    if encoder_name not in _BASE_DIMS:
        raise ValueError(f"unknown encoder {encoder_name!r}; expected one of {ENCODER_NAMES}")
    d = dim or _BASE_DIMS[encoder_name]
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 7, ENCODER_NAMES.index(encoder_name)])
    vectors = {}
    for w in vocab:
        v = rng.standard_normal(d)
        vectors[w] = v / np.linalg.norm(v)
    return EmbeddingTable(encoder_name, vectors)


def make_all_synthetic_tables(vocab: Vocabulary, seed: int = 0) -> dict[str, EmbeddingTable]:
    return {name: make_synthetic_table(vocab, name, seed) for name in ENCODER_NAMES}
