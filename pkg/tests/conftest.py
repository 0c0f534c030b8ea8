import numpy as np
import pytest

from echomap.core import StimulusClass, TrialTensor, Vocabulary, WordEvent
from echomap.synthgen import SynthConfig, generate_dataset


@pytest.fixture(scope="session")
def tiny_config():
    return SynthConfig(n_subjects=3, trials_per_condition=3, duration_s=6.0,
                       n_channels=8, latent_dim=4, seed=11)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_config):
    return generate_dataset(tiny_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_trial(data, fs=100.0, trial_id="t"):
    return TrialTensor(np.asarray(data, dtype=np.float64), fs, trial_id)


@pytest.fixture
def simple_events():
    return (
        WordEvent("night", 0.5, StimulusClass.POEM1, 0),
        WordEvent("house", 1.5, StimulusClass.POEM1, 0),
    )


@pytest.fixture
def small_vocab():
    return Vocabulary(("night", "house", "mouse", "bed"))
