"""Deterministic synthetic paired imagined/listened datasets.

The generator embeds a known ground-truth imagined->listened relationship:

    listened = H(K * (imagined / a)) + sensor_noise

where ``K *`` is a zero-padded temporal convolution with a fixed lag kernel
(shared across channels and subjects), ``a`` is the imagined attenuation and
``H`` is either the identity (``lag_linear``) or a 50/50 identity/tanh mix
(``nonlinear_tanh``).  Imagined trials are produced by inverting that map on a
noisy copy of the latent sensor projection, so the imagined-trial noise passes
through to the listened trial (the trial-specific shared signal), while
deranged trial pairings share only the weak class-mean signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .core import (
    ALL_CLASSES,
    MELODY_CLASSES,
    POEM_CLASSES,
    PairedSession,
    StimulusClass,
    TrialTensor,
    Vocabulary,
    WordEvent,
)

# 76 content words used to label synthetic word events.
POEM_WORDS = (
    "night", "house", "mouse", "stocking", "chimney", "children", "bed", "dream",
    "window", "snow", "moon", "roof", "sleigh", "reindeer", "hoof", "whistle",
    "thunder", "porch", "wall", "saint", "fur", "ash", "soot", "toy", "pack",
    "peddler", "eye", "dimple", "cheek", "rose", "nose", "cherry", "mouth",
    "bow", "beard", "chin", "pipe", "teeth", "smoke", "wreath", "face", "belly",
    "jelly", "elf", "laugh", "head", "dread", "work", "finger", "nod", "whirl",
    "thistle", "flight", "winter", "clatter", "shutter", "sash", "luster",
    "object", "courser", "comet", "cupid", "dancer", "prancer", "vixen",
    "blitzen", "meteor", "hurricane", "obstacle", "twinkle", "bundle", "frost",
    "spring", "leaf", "crew", "word",
)

MAPPING_KINDS = ("lag_linear", "nonlinear_tanh")

# Stream tags for per-purpose RNG derivation from the master seed.
_S_LATENTS = 0
_S_MIX_COMMON = 1
_S_MIX_SUBJECT = 2
_S_NOISE = 3
_S_WORD_TEMPLATES = 4


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *tags])


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 17
    trials_per_condition: int = 10
    duration_s: float = 27.0
    n_channels: int = 155
    sample_rate_hz: float = 100.0
    latent_dim: int = 8
    noise_sd_listened: float = 0.3
    noise_sd_imagined: float = 1.0
    imagined_attenuation: float = 0.5
    mapping_kind: str = "lag_linear"
    seed: int = 0
    # class-level latent signal amplitude relative to trial noise
    signal_gain: float = 0.1
    # amplitude of per-word evoked responses inside poem trials
    word_gain: float = 0.5
    word_spacing_s: float = 1.0
    window_pre_s: float = 0.2
    window_post_s: float = 0.8
    subject_perturbation: float = 0.3
    shared_latent_weight: float = 0.5
    lag_halfwidth_s: float = 0.1

    def validate(self) -> None:
        if self.n_subjects < 1 or self.trials_per_condition < 1:
            raise ValueError("subject and trial counts must be positive")
        if self.n_channels < 1 or self.latent_dim < 1:
            raise ValueError("channel and latent dimensions must be positive")
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("duration and sample rate must be positive")
        if self.noise_sd_listened < 0 or self.noise_sd_imagined < 0:
            raise ValueError("noise sds must be nonnegative")
        if not 0 < self.imagined_attenuation <= 1:
            raise ValueError("imagined_attenuation must lie in (0, 1]")
        if self.mapping_kind not in MAPPING_KINDS:
            raise ValueError(f"mapping_kind must be one of {MAPPING_KINDS}")
        if self.word_spacing_s <= 0:
            raise ValueError("word_spacing_s must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))


@dataclass(frozen=True)
class GroundTruth:
    """Generative description sufficient to regenerate listened from imagined."""

    kernel: np.ndarray  # lag kernel, index l = -max_lag .. +max_lag
    max_lag: int
    attenuation: float
    mapping_kind: str
    mixing: dict[str, np.ndarray]  # subject_id -> [C x L]
    noise_sd_listened: float
    noise_sd_imagined: float


@dataclass(frozen=True)
class SyntheticDataset:
    sessions: tuple[PairedSession, ...]
    ground_truth: GroundTruth
    vocabulary: Vocabulary
    config: SynthConfig

    def session(self, subject_id: str) -> PairedSession:
        for s in self.sessions:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)

    @property
    def subject_ids(self) -> tuple[str, ...]:
        return tuple(s.subject_id for s in self.sessions)


def make_vocabulary() -> Vocabulary:
    return Vocabulary(POEM_WORDS)


def lag_kernel(max_lag: int) -> np.ndarray:
    """Fixed, diagonally dominant lag kernel (invertible as a Toeplitz operator)."""
    lags = np.arange(-max_lag, max_lag + 1)
    k = 0.35 * np.exp(-np.abs(lags) / 2.0) * np.where(lags % 2 == 0, 1.0, -1.0)
    k[max_lag] = 1.0
    return k


def apply_lag_kernel(data: np.ndarray, kernel: np.ndarray, max_lag: int) -> np.ndarray:
    """y[c, t] = sum_l kernel[l] * data[c, t - l], zero-padded at the edges."""
    data = np.asarray(data, dtype=np.float64)
    out = np.zeros_like(data)
    for j, lag in enumerate(range(-max_lag, max_lag + 1)):
        if lag == 0:
            out += kernel[j] * data
        elif lag > 0:
            out[:, lag:] += kernel[j] * data[:, :-lag]
        else:
            out[:, :lag] += kernel[j] * data[:, -lag:]
    return out


def invert_lag_kernel(target: np.ndarray, kernel: np.ndarray, max_lag: int) -> np.ndarray:
    """Solve apply_lag_kernel(x) = target for x (banded Toeplitz solve)."""
    target = np.asarray(target, dtype=np.float64)
    n_t = target.shape[1]
    ab = np.tile(kernel[:, None], (1, n_t))
    return solve_banded((max_lag, max_lag), ab, target.T).T


def _tanh_mix(u: np.ndarray) -> np.ndarray:
    return 0.5 * u + 0.5 * np.tanh(u)


def _tanh_mix_inverse(v: np.ndarray, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Invert the monotone map u -> 0.5*u + 0.5*tanh(u) pointwise (Newton)."""
    u = np.array(v, dtype=np.float64)
    for _ in range(max_iter):
        t = np.tanh(u)
        f = 0.5 * u + 0.5 * t - v
        if np.max(np.abs(f)) < tol:
            break
        u -= f / (0.5 + 0.5 * (1.0 - t * t))
    return u


def apply_ground_truth(gt: GroundTruth, imagined: np.ndarray) -> np.ndarray:
    """Noise-free listened prediction from an imagined trial under the true map."""
    u = apply_lag_kernel(np.asarray(imagined) / gt.attenuation, gt.kernel, gt.max_lag)
    if gt.mapping_kind == "nonlinear_tanh":
        u = _tanh_mix(u)
    return u


def _invert_ground_truth(gt: GroundTruth, listened_clean: np.ndarray) -> np.ndarray:
    u = listened_clean
    if gt.mapping_kind == "nonlinear_tanh":
        u = _tanh_mix_inverse(u)
    return gt.attenuation * invert_lag_kernel(u, gt.kernel, gt.max_lag)


def _bandlimit(white: np.ndarray, f_lo: float, f_hi: float, fs: float) -> np.ndarray:
    """Keep only spectral content in [f_lo, f_hi]; unit-sd rows."""
    n_t = white.shape[-1]
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n_t, d=1.0 / fs)
    mask = (freqs >= f_lo) & (freqs <= f_hi)
    spec *= mask
    out = np.fft.irfft(spec, n=n_t, axis=-1)
    sd = out.std(axis=-1, keepdims=True)
    sd = np.where(sd < 1e-15, 1.0, sd)
    return out / sd


# spectral profiles per stimulus family (Hz)
_MELODY_BAND = (0.5, 4.0)
_POEM_BAND = (2.0, 10.0)


def make_stimulus_latents(cfg: SynthConfig) -> dict[StimulusClass, np.ndarray]:
    """Four band-limited latent signals [L x T], melodies/poems from distinct
    spectral profiles with a within-family shared component."""
    cfg.validate()
    rng = _rng(cfg.seed, _S_LATENTS)
    n_l, n_t = cfg.latent_dim, cfg.n_samples
    w = cfg.shared_latent_weight

    def draw(band):
        return _bandlimit(rng.standard_normal((n_l, n_t)), band[0], band[1], cfg.sample_rate_hz)

    base_mel = draw(_MELODY_BAND)
    base_poem = draw(_POEM_BAND)
    latents: dict[StimulusClass, np.ndarray] = {}
    for sc in ALL_CLASSES:
        base, band = (base_mel, _MELODY_BAND) if sc in MELODY_CLASSES else (base_poem, _POEM_BAND)
        own = draw(band)
        z = np.sqrt(w) * base + np.sqrt(1.0 - w) * own
        sd = z.std(axis=-1, keepdims=True)
        latents[sc] = z / np.where(sd < 1e-15, 1.0, sd)
    return latents


def make_word_schedule(cfg: SynthConfig, vocab: Vocabulary) -> tuple[WordEvent, ...]:
    """Isochronous word events for the poem conditions, cycling through the
    vocabulary across trials so every word receives coverage."""
    spacing = cfg.word_spacing_s
    first = cfg.window_pre_s
    last_allowed = cfg.duration_s - cfg.window_post_s
    n_events = int(np.floor((last_allowed - first) / spacing)) + 1
    if n_events < 1:
        raise ValueError("trial too short for any word event")
    events = []
    counter = 0
    for sc in POEM_CLASSES:
        for trial in range(cfg.trials_per_condition):
            for slot in range(n_events):
                events.append(WordEvent(
                    word=vocab.words[counter % len(vocab)],
                    onset_s=first + slot * spacing,
                    stimulus_class=sc,
                    trial_index=trial,
                ))
                counter += 1
    return tuple(events)


def _word_templates(cfg: SynthConfig, vocab: Vocabulary) -> np.ndarray:
    """Smooth per-word latent responses, shape [V x L x W]."""
    rng = _rng(cfg.seed, _S_WORD_TEMPLATES)
    width = int(round((cfg.window_pre_s + cfg.window_post_s) * cfg.sample_rate_hz))
    raw = rng.standard_normal((len(vocab), cfg.latent_dim, width))
    smooth = _bandlimit(raw, 1.0, 12.0, cfg.sample_rate_hz)
    return smooth * np.hanning(width)[None, None, :]


def _latent_stream(cfg: SynthConfig, sc: StimulusClass, trial_index: int,
                   latents, templates, events_by: dict) -> np.ndarray:
    z = cfg.signal_gain * latents[sc]
    if not sc.is_poem:
        return z
    z = z.copy()
    fs = cfg.sample_rate_hz
    for e in events_by.get((sc, trial_index), ()):
        start = int(round((e.onset_s - cfg.window_pre_s) * fs))
        tpl = templates[e.word_index]
        z[:, start:start + tpl.shape[1]] += cfg.word_gain * tpl
    return z


@dataclass(frozen=True)
class _IndexedEvent:
    onset_s: float
    word_index: int


def generate_dataset(cfg: SynthConfig) -> SyntheticDataset:
    """Generate a full deterministic dataset; pure function of the config."""
    cfg.validate()
    vocab = make_vocabulary()
    latents = make_stimulus_latents(cfg)
    schedule = make_word_schedule(cfg, vocab)
    templates = _word_templates(cfg, vocab)
    events_by: dict[tuple[StimulusClass, int], list[_IndexedEvent]] = {}
    for e in schedule:
        events_by.setdefault((e.stimulus_class, e.trial_index), []).append(
            _IndexedEvent(e.onset_s, vocab.index(e.word)))

    n_c, n_l = cfg.n_channels, cfg.latent_dim
    max_lag = int(round(cfg.lag_halfwidth_s * cfg.sample_rate_hz))
    kernel = lag_kernel(max_lag)
    a_common = _rng(cfg.seed, _S_MIX_COMMON).standard_normal((n_c, n_l)) / np.sqrt(n_l)

    mixing: dict[str, np.ndarray] = {}
    sessions = []
    for subj in range(cfg.n_subjects):
        subject_id = f"s{subj:02d}"
        pert = _rng(cfg.seed, _S_MIX_SUBJECT, subj).standard_normal((n_c, n_l)) / np.sqrt(n_l)
        a_s = a_common + cfg.subject_perturbation * pert
        mixing[subject_id] = a_s
        gt = GroundTruth(kernel, max_lag, cfg.imagined_attenuation, cfg.mapping_kind,
                         {}, cfg.noise_sd_listened, cfg.noise_sd_imagined)
        noise_rng = _rng(cfg.seed, _S_NOISE, subj)
        imagined: dict[StimulusClass, list[TrialTensor]] = {sc: [] for sc in ALL_CLASSES}
        listened: dict[StimulusClass, list[TrialTensor]] = {sc: [] for sc in ALL_CLASSES}
        for sc in ALL_CLASSES:
            for i in range(cfg.trials_per_condition):
                stream = _latent_stream(cfg, sc, i, latents, templates, events_by)
                clean = a_s @ stream
                eps_im = noise_rng.standard_normal(clean.shape) * cfg.noise_sd_imagined
                eps_lis = noise_rng.standard_normal(clean.shape) * cfg.noise_sd_listened
                shared = clean + eps_im
                x = _invert_ground_truth(gt, shared)
                y = shared + eps_lis
                tid = f"{subject_id}_{sc.value}_{i:02d}"
                imagined[sc].append(TrialTensor(x, cfg.sample_rate_hz, f"{tid}_imag"))
                listened[sc].append(TrialTensor(y, cfg.sample_rate_hz, f"{tid}_list"))
        sessions.append(PairedSession(subject_id, imagined, listened, schedule))

    ground_truth = GroundTruth(kernel, max_lag, cfg.imagined_attenuation, cfg.mapping_kind,
                               mixing, cfg.noise_sd_listened, cfg.noise_sd_imagined)
    return SyntheticDataset(tuple(sessions), ground_truth, vocab, cfg)
