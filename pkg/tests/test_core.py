import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echomap.core import (
    ALL_CLASSES,
    EmbeddingTable,
    MELODY_CLASSES,
    POEM_CLASSES,
    ParameterStore,
    RankOutcome,
    StimulusClass,
    TrialTensor,
    Vocabulary,
    WordEvent,
    validate_session,
)
from echomap.synthgen import generate_dataset

from conftest import make_trial


class TestStimulusClass:
    def test_four_classes_partition_into_families(self):
        assert len(ALL_CLASSES) == 4
        assert set(MELODY_CLASSES) | set(POEM_CLASSES) == set(ALL_CLASSES)
        assert not set(MELODY_CLASSES) & set(POEM_CLASSES)

    def test_coarse_labels(self):
        assert StimulusClass.MELODY1.coarse == "melody"
        assert StimulusClass.POEM2.coarse == "poem"
        assert StimulusClass.POEM1.is_poem and not StimulusClass.MELODY2.is_poem


class TestTrialTensor:
    def test_shape_properties(self):
        t = make_trial(np.zeros((5, 30)), fs=100.0)
        assert t.n_channels == 5
        assert t.n_samples == 30
        assert t.duration_s == pytest.approx(0.3)

    def test_data_is_immutable(self):
        t = make_trial(np.zeros((2, 4)))
        with pytest.raises(ValueError):
            t.data[0, 0] = 1.0

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            make_trial(np.zeros(4))
        with pytest.raises(ValueError):
            make_trial(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            TrialTensor(np.zeros((2, 4)), sample_rate_hz=0.0)


class TestVocabulary:
    def test_index_lookup(self, small_vocab):
        assert small_vocab.index("mouse") == 2
        assert "bed" in small_vocab
        assert "cat" not in small_vocab
        with pytest.raises(KeyError):
            small_vocab.index("cat")

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Vocabulary(("a", "b", "a"))

    @given(st.lists(st.text(min_size=1, max_size=6), min_size=1, max_size=20,
                    unique=True))
    def test_index_is_position(self, words):
        v = Vocabulary(tuple(words))
        for i, w in enumerate(words):
            assert v.index(w) == i


class TestEmbeddingTable:
    def test_matrix_follows_vocab_order(self, small_vocab):
        vecs = {w: np.full(3, float(i)) for i, w in enumerate(small_vocab)}
        table = EmbeddingTable("enc", vecs)
        m = table.matrix(small_vocab)
        assert m.shape == (4, 3)
        assert np.array_equal(m[:, 0], np.arange(4.0))

    def test_rejects_mixed_dims_and_nonfinite(self):
        with pytest.raises(ValueError):
            EmbeddingTable("enc", {"a": np.zeros(2), "b": np.zeros(3)})
        with pytest.raises(ValueError):
            EmbeddingTable("enc", {"a": np.array([np.nan, 0.0])})

    def test_matrix_reports_missing_words(self, small_vocab):
        table = EmbeddingTable("enc", {"night": np.zeros(2)})
        with pytest.raises(KeyError):
            table.matrix(small_vocab)


class TestRankOutcome:
    def test_rank_bounds_enforced(self):
        sims = np.zeros(5)
        RankOutcome("w", 1, sims)
        RankOutcome("w", 5, sims)
        with pytest.raises(ValueError):
            RankOutcome("w", 0, sims)
        with pytest.raises(ValueError):
            RankOutcome("w", 6, sims)


class TestParameterStore:
    def test_total_count_sums_sizes(self):
        store = ParameterStore({"a": np.zeros((2, 3)), "b": np.zeros(5)})
        assert store.total_count == 11
        assert len(store) == 2
        assert dict(iter(store))["a"].shape == (2, 3)


class TestSessionValidation:
    def test_clean_synthetic_session_passes(self, tiny_dataset):
        for s in tiny_dataset.sessions:
            assert validate_session(s, tiny_dataset.vocabulary) == []

    def test_detects_length_mismatch(self, tiny_dataset):
        s = tiny_dataset.sessions[0]
        sc = ALL_CLASSES[0]
        bad_imagined = dict(s.imagined)
        first = s.imagined[sc][0]
        bad_imagined[sc] = (make_trial(first.data[:, :-10]),) + s.imagined[sc][1:]
        from echomap.core import PairedSession
        broken = PairedSession(s.subject_id, bad_imagined, s.listened, s.word_events)
        problems = validate_session(broken)
        assert any("mismatch" in p or "differing lengths" in p for p in problems)

    def test_detects_nonfinite_and_unknown_word(self, tiny_dataset):
        s = tiny_dataset.sessions[0]
        sc = ALL_CLASSES[0]
        data = np.array(s.listened[sc][0].data)
        data[0, 0] = np.nan
        bad_listened = dict(s.listened)
        bad_listened[sc] = (make_trial(data),) + s.listened[sc][1:]
        from echomap.core import PairedSession
        events = (WordEvent("not-a-word", 0.5, StimulusClass.POEM1, 0),)
        broken = PairedSession(s.subject_id, s.imagined, bad_listened, events)
        problems = validate_session(broken, tiny_dataset.vocabulary)
        assert any("non-finite" in p for p in problems)
        assert any("not in vocabulary" in p for p in problems)

    def test_detects_onset_too_late_for_window(self, tiny_dataset):
        s = tiny_dataset.sessions[0]
        from echomap.core import PairedSession
        late = tiny_dataset.config.duration_s - 0.1
        events = (WordEvent("night", late, StimulusClass.POEM1, 0),)
        broken = PairedSession(s.subject_id, s.imagined, s.listened, events)
        assert any("post-onset window" in p for p in validate_session(broken))

    def test_trial_pairs_yields_aligned_trials(self, tiny_dataset):
        s = tiny_dataset.sessions[0]
        pairs = list(s.trial_pairs())
        assert len(pairs) == 4 * tiny_dataset.config.trials_per_condition
        for xi, yi, sc in pairs:
            assert xi.n_samples == yi.n_samples
            assert xi.trial_id.endswith("_imag") and yi.trial_id.endswith("_list")
            assert sc.value in xi.trial_id
