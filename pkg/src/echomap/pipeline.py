"""Zero-shot composition of a frozen mapping with a frozen listened-word
decoder, plus the rank-curve summary (area above chance) and top-word
consistency analyses."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (
    POEM_CLASSES,
    PairedSession,
    RankOutcome,
    TrialTensor,
    WordEvent,
)
from .decoder import TrainedDecoder, rank_retrieve_batch, train_decoder
from .evalmap import build_train_pairs, derive_seed, fit_mapping
from .models import MappingSpec, TrainedMapping, forward
from .prep import WordWindowSpec, extract_word_windows, zscore_channels
from .stats import TestResult, ranksum
from .synthgen import SyntheticDataset


class ZeroShotViolation(RuntimeError):
    """The held-out subject leaked into a component's training manifest."""


def assert_zero_shot(subject_id: str, mapping: TrainedMapping, decoder: TrainedDecoder):
    if subject_id in mapping.meta.get("training_subjects", ()):
        raise ZeroShotViolation(f"{subject_id} appears in the mapping training manifest")
    if subject_id in decoder.training_subjects:
        raise ZeroShotViolation(f"{subject_id} appears in the decoder training manifest")


def decode_imagined(
    imagined_trial: TrialTensor,
    events: list[WordEvent] | tuple[WordEvent, ...],
    mapping: TrainedMapping,
    decoder: TrainedDecoder,
    window_spec: WordWindowSpec = WordWindowSpec(),
) -> tuple[list[RankOutcome], list]:
    """Map an imagined trial into the listened space and rank-decode the word
    windows extracted at the annotated onsets."""
    yhat = forward(mapping, zscore_channels(imagined_trial.data))
    predicted = TrialTensor(yhat, imagined_trial.sample_rate_hz,
                            imagined_trial.trial_id + "_pred")
    windows, skipped = extract_word_windows(predicted, events, window_spec)
    if not windows:
        return [], skipped
    data = np.stack([w for w, _ in windows])
    return rank_retrieve_batch(decoder, data, [word for _, word in windows]), skipped


def collect_poem_windows(
    sessions: list[PairedSession],
    source: str = "listened",
    window_spec: WordWindowSpec = WordWindowSpec(),
) -> tuple[np.ndarray, list[str], int]:
    """Word-aligned [N x C x W] windows from z-scored poem trials."""
    if source not in ("listened", "imagined"):
        raise ValueError("source must be 'listened' or 'imagined'")
    windows, words, n_skipped = [], [], 0
    for session in sessions:
        cond = session.listened if source == "listened" else session.imagined
        for sc in POEM_CLASSES:
            for i, trial in enumerate(cond[sc]):
                z = TrialTensor(zscore_channels(trial.data), trial.sample_rate_hz)
                got, skipped = extract_word_windows(z, session.events_for(sc, i), window_spec)
                n_skipped += len(skipped)
                for w, word in got:
                    windows.append(w)
                    words.append(word)
    if not windows:
        raise ValueError("no word windows found (are there poem trials with events?)")
    return np.stack(windows), words, n_skipped


def auc_above_chance(outcomes: list[RankOutcome], vocab_size: int,
                     max_rank: int | None = None) -> float:
    """Mean excess of the rank CDF over the chance diagonal up to rank K,
    normalized by its theoretical maximum; returned as a percentage."""
    if not outcomes:
        raise ValueError("need at least one outcome")
    k_max = vocab_size if max_rank is None else max_rank
    if not 1 <= k_max <= vocab_size:
        raise ValueError(f"max rank must lie in [1, {vocab_size}]")
    ranks = np.array([o.rank for o in outcomes])
    ks = np.arange(1, k_max + 1)
    cdf = np.array([(ranks <= k).mean() for k in ks])
    chance = ks / vocab_size
    auc = np.mean(cdf - chance)
    auc_max = np.mean(1.0 - chance)
    return float(100.0 * auc / auc_max)


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        raise ValueError("Jaccard undefined for two empty sets")
    return len(a & b) / len(union)


def ranks_vs_uniform(outcomes: list[RankOutcome], vocab_size: int,
                     seed: int = 0, n_uniform: int | None = None) -> TestResult:
    """One-sided rank-sum test that observed ranks are lower than uniform."""
    ranks = [o.rank for o in outcomes]
    rng = np.random.default_rng(seed)
    uniform = rng.integers(1, vocab_size + 1, size=n_uniform or max(1000, len(ranks)))
    return ranksum(ranks, uniform, alternative="less", method="auto", exact_limit=0)


@dataclass(frozen=True)
class ConsistencyResult:
    pairwise: np.ndarray          # Jaccard across (subject, mapping) combinations
    vs_listened: np.ndarray       # each combination vs the listened top-k set
    null: np.ndarray              # random equal-size subsets of the vocabulary
    p_pairwise: TestResult
    p_vs_listened: TestResult


def random_set_jaccards(vocab_size: int, set_size: int, n_draws: int,
                        seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = np.empty(n_draws)
    for i in range(n_draws):
        a = rng.choice(vocab_size, size=set_size, replace=False)
        b = rng.choice(vocab_size, size=set_size, replace=False)
        inter = len(np.intersect1d(a, b, assume_unique=True))
        out[i] = inter / (2 * set_size - inter)
    return out


def consistency_analysis(top_sets: dict, listened_top: set, vocab_size: int = 76,
                         set_size: int = 20, n_null_draws: int = 100_000,
                         seed: int = 0) -> ConsistencyResult:
    """Jaccard consistency of top-word sets across (subject, mapping)
    combinations, against the listened decoder's set, and against a random
    subset null."""
    for key, s in list(top_sets.items()) + [("listened", listened_top)]:
        if len(set(s)) != set_size:
            raise ValueError(f"set {key!r} must contain exactly {set_size} distinct words")
    keys = sorted(top_sets)
    pairwise = np.array([jaccard(top_sets[a], top_sets[b])
                         for a, b in combinations(keys, 2)])
    vs_listened = np.array([jaccard(top_sets[k], listened_top) for k in keys])
    null = random_set_jaccards(vocab_size, set_size, n_null_draws, seed)
    p_pair = ranksum(pairwise, null, alternative="greater", method="auto", exact_limit=0)
    p_vs = ranksum(vs_listened, null, alternative="greater", method="auto", exact_limit=0)
    return ConsistencyResult(pairwise, vs_listened, null, p_pair, p_vs)


@dataclass
class PipelineRun:
    subject_id: str
    mapping_kind: str
    encoder_name: str
    outcomes: list[RankOutcome]
    auc_above_chance_pct: float
    n_skipped: int = 0
    listened_outcomes: list[RankOutcome] = field(default_factory=list)


def run_zero_shot(
    dataset: SyntheticDataset,
    mapping_specs: list[MappingSpec],
    decoder_spec,
    tables: dict,
    seed: int = 0,
    window_spec: WordWindowSpec = WordWindowSpec(),
    optim=None,
    holdout_trials: int = 2,
    subjects: list[str] | None = None,
    mappings_override: dict | None = None,
    evaluate_listened_ceiling: bool = True,
) -> list[PipelineRun]:
    """Full LOSO zero-shot pipeline over (subject x mapping x encoder).

    Per held-out subject, the mapping models are trained on the other
    subjects' paired trials and the decoders on the other subjects' listened
    word windows; the held-out subject's imagined poem trials are then decoded
    with both components frozen.  ``mappings_override`` maps a mapping kind
    value to a pre-built TrainedMapping (used for random-mapping controls)."""
    vocab = dataset.vocabulary
    runs: list[PipelineRun] = []
    subject_ids = list(subjects or dataset.subject_ids)
    all_ids = list(dataset.subject_ids)
    for held_out in subject_ids:
        idx = all_ids.index(held_out)
        train_subjects = [s for s in all_ids if s != held_out]
        train_sessions = [dataset.session(s) for s in train_subjects]
        train_pairs, unseen_pairs = build_train_pairs(dataset, train_subjects, holdout_trials)

        mappings = {}
        for m_i, spec in enumerate(mapping_specs):
            key = spec.kind.value
            if mappings_override and key in mappings_override:
                mappings[key] = mappings_override[key]
            else:
                model = fit_mapping(spec, train_pairs, unseen_pairs,
                                    derive_seed(seed, idx, 0, m_i), optim)
                model.meta["training_subjects"] = train_subjects
                mappings[key] = model

        windows, words, _ = collect_poem_windows(train_sessions, "listened", window_spec)
        held_session = dataset.session(held_out)
        for encoder_name, table in tables.items():
            decoder = train_decoder(windows, words, table, vocab, decoder_spec,
                                    seed=derive_seed(seed, idx, 1),
                                    training_subjects=tuple(train_subjects))
            listened_outcomes: list[RankOutcome] = []
            if evaluate_listened_ceiling:
                test_w, test_words, _ = collect_poem_windows([held_session], "listened",
                                                             window_spec)
                listened_outcomes = rank_retrieve_batch(decoder, test_w, test_words)
            for key, mapping in mappings.items():
                assert_zero_shot(held_out, mapping, decoder)
                outcomes: list[RankOutcome] = []
                n_skipped = 0
                for sc in POEM_CLASSES:
                    for i, trial in enumerate(held_session.imagined[sc]):
                        got, skipped = decode_imagined(trial, held_session.events_for(sc, i),
                                                       mapping, decoder, window_spec)
                        outcomes.extend(got)
                        n_skipped += len(skipped)
                runs.append(PipelineRun(
                    held_out, key, encoder_name, outcomes,
                    auc_above_chance(outcomes, len(vocab)) if outcomes else float("nan"),
                    n_skipped, listened_outcomes))
    return runs
