"""Shared domain types for paired imagined/listened recordings.

All array data is float64 in memory; persistence formats (see ``echomap.io``)
use 32-bit little-endian arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class StimulusClass(Enum):
    MELODY1 = "melody1"
    MELODY2 = "melody2"
    POEM1 = "poem1"
    POEM2 = "poem2"

    @property
    def is_poem(self) -> bool:
        return self in (StimulusClass.POEM1, StimulusClass.POEM2)

    @property
    def coarse(self) -> str:
        """Two-class label: 'melody' or 'poem'."""
        return "poem" if self.is_poem else "melody"


MELODY_CLASSES = (StimulusClass.MELODY1, StimulusClass.MELODY2)
POEM_CLASSES = (StimulusClass.POEM1, StimulusClass.POEM2)
ALL_CLASSES = tuple(StimulusClass)


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"trial data must be 2-D [channels x samples], got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"trial data must be non-empty, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TrialTensor:
    """One trial's multichannel time series, shape [C x T]."""

    data: np.ndarray
    sample_rate_hz: float
    trial_id: str = ""

    def __post_init__(self):
        arr = _as_matrix(self.data)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class WordEvent:
    """A word onset within one trial of a poem condition (trial-relative time)."""

    word: str
    onset_s: float
    stimulus_class: StimulusClass
    trial_index: int = 0


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if len(set(self.words)) != len(self.words):
            raise ValueError("vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __iter__(self):
        return iter(self.words)

    @property
    def _index(self) -> dict[str, int]:
        # cached lazily on first use
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {w: i for i, w in enumerate(self.words)}
            self.__dict__["_index_cache"] = idx
        return idx

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise KeyError(f"word {word!r} not in vocabulary") from None


@dataclass(frozen=True)
class EmbeddingTable:
    """Vocabulary of words with fixed pretrained vectors (one encoder strategy)."""

    encoder_name: str
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        if not self.vectors:
            raise ValueError("embedding table is empty")
        dims = set()
        frozen = {}
        for word, v in self.vectors.items():
            arr = np.asarray(v, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"embedding for {word!r} must be a 1-D vector")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite embedding for {word!r}")
            arr.flags.writeable = False
            frozen[word] = arr
            dims.add(arr.shape[0])
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        object.__setattr__(self, "vectors", frozen)

    @property
    def dim(self) -> int:
        return next(iter(self.vectors.values())).shape[0]

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def matrix(self, vocab: Vocabulary) -> np.ndarray:
        """Stack vectors in vocabulary order, shape [V x D]."""
        missing = [w for w in vocab if w not in self.vectors]
        if missing:
            raise KeyError(f"embedding table missing {len(missing)} vocabulary words, e.g. {missing[:3]}")
        return np.stack([self.vectors[w] for w in vocab])


@dataclass(frozen=True)
class RankOutcome:
    """One retrieval query: true word, its rank, and the similarity vector."""

    true_word: str
    rank: int
    similarities: np.ndarray

    def __post_init__(self):
        sims = np.asarray(self.similarities, dtype=np.float64)
        sims.flags.writeable = False
        object.__setattr__(self, "similarities", sims)
        if not 1 <= self.rank <= sims.shape[0]:
            raise ValueError(f"rank {self.rank} outside [1, {sims.shape[0]}]")


@dataclass
class ParameterStore:
    """Ordered name -> array mapping for trained model state."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.arrays) != len(set(self.arrays)):
            raise ValueError("duplicate parameter names")

    @property
    def total_count(self) -> int:
        return int(sum(a.size for a in self.arrays.values()))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays.items())

    def __len__(self) -> int:
        return len(self.arrays)


@dataclass(frozen=True)
class PairedSession:
    """One subject's aligned imagined/listened trials across the 8 conditions."""

    subject_id: str
    imagined: dict[StimulusClass, tuple[TrialTensor, ...]]
    listened: dict[StimulusClass, tuple[TrialTensor, ...]]
    word_events: tuple[WordEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "imagined", {k: tuple(v) for k, v in self.imagined.items()})
        object.__setattr__(self, "listened", {k: tuple(v) for k, v in self.listened.items()})
        object.__setattr__(self, "word_events", tuple(self.word_events))

    def trial_pairs(self, classes=None):
        """Yield (imagined, listened, stimulus_class) for correctly paired trials."""
        for sc in classes or ALL_CLASSES:
            for xi, yi in zip(self.imagined.get(sc, ()), self.listened.get(sc, ())):
                yield xi, yi, sc

    def events_for(self, stimulus_class: StimulusClass, trial_index: int) -> tuple[WordEvent, ...]:
        return tuple(
            e for e in self.word_events
            if e.stimulus_class is stimulus_class and e.trial_index == trial_index
        )


def validate_session(s: PairedSession, vocabulary: Vocabulary | None = None,
                     window_post_s: float = 0.8) -> list[str]:
    """Check all session invariants; returns human-readable violation strings."""
    problems: list[str] = []
    counts = set()
    for cond_name, cond in (("imagined", s.imagined), ("listened", s.listened)):
        for sc in ALL_CLASSES:
            trials = cond.get(sc, ())
            if not trials:
                problems.append(f"{s.subject_id}: no {cond_name} trials for {sc.value}")
                continue
            counts.add(len(trials))
            lengths = {t.n_samples for t in trials}
            if len(lengths) > 1:
                problems.append(
                    f"{s.subject_id}: {cond_name} {sc.value} trials have differing lengths {sorted(lengths)}"
                )
            for i, t in enumerate(trials):
                if not np.all(np.isfinite(t.data)):
                    problems.append(
                        f"{s.subject_id}: non-finite sample in {cond_name} {sc.value} trial {i}"
                    )
    if len(counts) > 1:
        problems.append(f"{s.subject_id}: trial counts differ across conditions: {sorted(counts)}")
    for sc in ALL_CLASSES:
        for i, (xi, yi) in enumerate(zip(s.imagined.get(sc, ()), s.listened.get(sc, ()))):
            if xi.n_samples != yi.n_samples:
                problems.append(
                    f"{s.subject_id}: alignment length mismatch for {sc.value} trial {i}: "
                    f"imagined T={xi.n_samples} vs listened T={yi.n_samples}"
                )
            if xi.n_channels != yi.n_channels:
                problems.append(
                    f"{s.subject_id}: channel count mismatch for {sc.value} trial {i}"
                )
    for e in s.word_events:
        trials = s.listened.get(e.stimulus_class, ())
        if trials:
            duration = trials[0].duration_s
            if e.onset_s < 0:
                problems.append(f"{s.subject_id}: negative onset {e.onset_s} for word {e.word!r}")
            if e.onset_s + window_post_s > duration + 1e-9:
                problems.append(
                    f"{s.subject_id}: word {e.word!r} onset {e.onset_s}s leaves no room for a "
                    f"{window_post_s}s post-onset window in a {duration}s trial"
                )
        if vocabulary is not None and e.word not in vocabulary:
            problems.append(f"{s.subject_id}: word {e.word!r} not in vocabulary")
    return problems
