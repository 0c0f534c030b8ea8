"""Mapping evaluation: per-channel correlation, null pairings, LOSO harness,
correlation-based classification, ensemble voting and the data-scaling grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ALL_CLASSES, PairedSession, StimulusClass, TrialTensor
from .models import (
    MappingKind,
    MappingSpec,
    OptimConfig,
    TrainedMapping,
    TrainingDiverged,
    fit_linear_lag,
    forward,
    pearson_per_channel,
    train_mapping,
)
from .prep import zscore_channels
from .synthgen import SyntheticDataset


class EvalCondition(Enum):
    TRAIN = "train"
    UNSEEN_TRIALS = "unseen_trials"
    LOSO = "loso"


@dataclass(frozen=True)
class TrialPair:
    imagined: TrialTensor
    listened: TrialTensor
    stimulus_class: StimulusClass


@dataclass
class EvalRecord:
    subject_id: str
    condition: EvalCondition
    model_kind: MappingKind
    is_null: bool
    mean_r: float
    per_channel_r: np.ndarray
    failed: bool = False
    error: str | None = None


def mean_channel_pearson(yhat: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    r = pearson_per_channel(yhat, y)
    return float(r.mean()), r


def derive_seed(master: int, *tags: int) -> int:
    return int(np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *tags])
               .generate_state(1)[0])


def session_pairs(session: PairedSession, trial_slice: slice = slice(None)) -> list[TrialPair]:
    pairs = []
    for sc in ALL_CLASSES:
        ims = session.imagined[sc][trial_slice]
        lis = session.listened[sc][trial_slice]
        pairs.extend(TrialPair(x, y, sc) for x, y in zip(ims, lis))
    return pairs


def make_null_pairing(session_or_pairs, seed: int) -> list[TrialPair]:
    """Derangement of a session's trial pairs: every imagined trial is paired
    with an incorrect listened trial; the class label travels with the
    listened trial."""
    if isinstance(session_or_pairs, PairedSession):
        pairs = session_pairs(session_or_pairs)
    else:
        pairs = list(session_or_pairs)
    n = len(pairs)
    if n < 2:
        raise ValueError("derangement impossible with fewer than 2 trials")
    rng = np.random.default_rng(seed)
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            break
    return [
        TrialPair(pairs[i].imagined, pairs[perm[i]].listened, pairs[perm[i]].stimulus_class)
        for i in range(n)
    ]


def _as_xy(pairs: list[TrialPair]) -> list[tuple[TrialTensor, TrialTensor]]:
    return [(p.imagined, p.listened) for p in pairs]


def fit_mapping(spec: MappingSpec, train_pairs: list[TrialPair],
                val_pairs: list[TrialPair], seed: int,
                optim: OptimConfig | None = None) -> TrainedMapping:
    if spec.kind is MappingKind.LINEAR_LAG:
        return fit_linear_lag(_as_xy(train_pairs), lagspec=spec.lag, lam=spec.lam)
    return train_mapping(spec, _as_xy(train_pairs), _as_xy(val_pairs),
                         optim or OptimConfig(), seed=seed)


def evaluate_pairs(model: TrainedMapping, pairs: list[TrialPair]) -> tuple[float, np.ndarray]:
    """Mean per-channel Pearson r of predictions over correctly-paired trials."""
    rs = []
    for p in pairs:
        yhat = forward(model, zscore_channels(p.imagined.data))
        rs.append(pearson_per_channel(yhat, zscore_channels(p.listened.data)))
    per_channel = np.mean(rs, axis=0)
    return float(per_channel.mean()), per_channel


def build_train_pairs(dataset: SyntheticDataset, subject_ids: list[str],
                      holdout_trials: int = 2) -> tuple[list[TrialPair], list[TrialPair]]:
    """Training and unseen-trial pairs for the given subjects, in a canonical
    order (subjects as given, classes in enum order, trials ascending).
    The last `holdout_trials` trials per condition are held out."""
    train, unseen = [], []
    for sid in subject_ids:
        session = dataset.session(sid)
        n = len(session.listened[ALL_CLASSES[0]])
        cut = max(1, n - holdout_trials)
        train.extend(session_pairs(session, slice(0, cut)))
        unseen.extend(session_pairs(session, slice(cut, n)))
    return train, unseen


def run_loso(dataset: SyntheticDataset, spec: MappingSpec, seed: int = 0,
             optim: OptimConfig | None = None, holdout_trials: int = 2,
             conditions: tuple[EvalCondition, ...] = tuple(EvalCondition),
             ) -> list[EvalRecord]:
    """Leave-one-subject-out evaluation with paired real and null models.

    For each held-out subject, a real model is trained on the other subjects'
    correctly-paired trials and a null model on a deranged pairing of the same
    trials; both are evaluated on training data, unseen trials of the seen
    subjects, and the held-out subject.  Real and null records for a subject
    reference identical test data."""
    subject_ids = list(dataset.subject_ids)
    if len(subject_ids) < 2:
        raise ValueError("LOSO needs at least 2 subjects")
    records: list[EvalRecord] = []
    for idx, held_out in enumerate(subject_ids):
        train_subjects = [s for s in subject_ids if s != held_out]
        train_pairs, unseen_pairs = build_train_pairs(dataset, train_subjects, holdout_trials)
        null_pairs = make_null_pairing(train_pairs, derive_seed(seed, idx, 2))
        loso_pairs = session_pairs(dataset.session(held_out))
        eval_sets = {
            EvalCondition.TRAIN: train_pairs,
            EvalCondition.UNSEEN_TRIALS: unseen_pairs,
            EvalCondition.LOSO: loso_pairs,
        }
        for is_null, fit_pairs, role in ((False, train_pairs, 0), (True, null_pairs, 1)):
            try:
                model = fit_mapping(spec, fit_pairs, unseen_pairs,
                                    derive_seed(seed, idx, role), optim)
            except TrainingDiverged as exc:
                for cond in conditions:
                    records.append(EvalRecord(held_out, cond, spec.kind, is_null,
                                              float("nan"), np.array([]),
                                              failed=True, error=str(exc)))
                continue
            for cond in conditions:
                mean_r, per_channel = evaluate_pairs(model, eval_sets[cond])
                records.append(EvalRecord(held_out, cond, spec.kind, is_null,
                                          mean_r, per_channel))
    return records


@dataclass
class ClassificationResult:
    classes: tuple[StimulusClass, ...]
    counts: np.ndarray            # [4 x 4] true x predicted
    counts_coarse: np.ndarray     # [2 x 2] melody/poem
    assigned: list[StimulusClass]
    scores: list[np.ndarray]      # per trial, correlation with each class template

    @property
    def probabilities(self) -> np.ndarray:
        row = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.where(row == 0, 1, row)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / max(1, self.counts.sum()))

    @property
    def accuracy_coarse(self) -> float:
        return float(np.trace(self.counts_coarse) / max(1, self.counts_coarse.sum()))

    def diagonal_offdiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.probabilities
        mask = np.eye(len(self.classes), dtype=bool)
        return p[mask], p[~mask]


def make_class_templates(session: PairedSession) -> dict[StimulusClass, np.ndarray]:
    """Mean z-scored listened response per stimulus class for one subject."""
    return {
        sc: np.mean([zscore_channels(t.data) for t in session.listened[sc]], axis=0)
        for sc in ALL_CLASSES
    }


def correlation_classify(pred_trials: list[tuple[np.ndarray, StimulusClass]],
                         templates: dict[StimulusClass, np.ndarray]) -> ClassificationResult:
    """Assign each predicted trial to the class whose mean listened response
    maximizes the mean per-channel Pearson correlation."""
    missing = [sc for sc in ALL_CLASSES if sc not in templates]
    if missing:
        raise ValueError(f"missing class templates: {[sc.value for sc in missing]}")
    class_index = {sc: i for i, sc in enumerate(ALL_CLASSES)}
    coarse_index = {"melody": 0, "poem": 1}
    counts = np.zeros((4, 4), dtype=int)
    counts2 = np.zeros((2, 2), dtype=int)
    assigned, scores = [], []
    for data, true_class in pred_trials:
        s = np.array([pearson_per_channel(data, templates[sc]).mean() for sc in ALL_CLASSES])
        pred = ALL_CLASSES[int(np.argmax(s))]
        counts[class_index[true_class], class_index[pred]] += 1
        counts2[coarse_index[true_class.coarse], coarse_index[pred.coarse]] += 1
        assigned.append(pred)
        scores.append(s)
    return ClassificationResult(ALL_CLASSES, counts, counts2, assigned, scores)


def ensemble_vote(per_model: list[list[tuple[StimulusClass, float]]]) -> list[StimulusClass]:
    """Majority vote per trial across models; ties broken by the highest
    summed correlation across the models voting for each tied label."""
    if not per_model:
        raise ValueError("need at least one model's labels")
    n = len(per_model[0])
    if any(len(votes) != n for votes in per_model):
        raise ValueError("per-model label lists must have equal lengths")
    out = []
    for i in range(n):
        tally: dict[StimulusClass, list[float]] = {}
        for votes in per_model:
            label, score = votes[i]
            tally.setdefault(label, []).append(score)
        best_count = max(len(v) for v in tally.values())
        tied = [label for label, v in tally.items() if len(v) == best_count]
        if len(tied) > 1:
            tied.sort(key=lambda sc: (-sum(tally[sc]), ALL_CLASSES.index(sc)))
        out.append(tied[0])
    return out


@dataclass(frozen=True)
class ScalingPoint:
    k: int
    subject_id: str
    mean_r: float           # averaged over the m subset draws
    subset_values: tuple[float, ...]


def scaling_curve(dataset: SyntheticDataset, spec: MappingSpec, m: int = 10,
                  seed: int = 0, ks: list[int] | None = None,
                  optim: OptimConfig | None = None,
                  holdout_trials: int = 2) -> list[ScalingPoint]:
    """For each held-out subject and training-set size k, train on m random
    k-subsets of the remaining subjects and average held-out performance.

    At k = N-1 only one subset exists; it is fitted with the same seed and
    data ordering as the LOSO harness, so the value equals the LOSO record."""
    subject_ids = list(dataset.subject_ids)
    n = len(subject_ids)
    if m < 1:
        raise ValueError("m must be >= 1")
    ks = ks or list(range(1, n))
    if any(k < 1 or k > n - 1 for k in ks):
        raise ValueError(f"k values must lie in [1, {n - 1}]")
    points = []
    for idx, held_out in enumerate(subject_ids):
        others = [s for s in subject_ids if s != held_out]
        loso_pairs = session_pairs(dataset.session(held_out))
        for k in ks:
            draws = 1 if k == n - 1 else m
            values = []
            for draw in range(draws):
                if k == n - 1:
                    subset = others
                    fit_seed = derive_seed(seed, idx, 0)  # matches run_loso real fold
                else:
                    rng = np.random.default_rng(derive_seed(seed, 5, idx, k, draw))
                    subset = [others[j] for j in sorted(rng.choice(len(others), size=k,
                                                                  replace=False))]
                    fit_seed = derive_seed(seed, 6, idx, k, draw)
                train_pairs, unseen_pairs = build_train_pairs(dataset, subset, holdout_trials)
                model = fit_mapping(spec, train_pairs, unseen_pairs, fit_seed, optim)
                values.append(evaluate_pairs(model, loso_pairs)[0])
            points.append(ScalingPoint(k, held_out, float(np.mean(values)), tuple(values)))
    return points
