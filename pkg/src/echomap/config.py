"""Experiment configuration: a sectioned key-value file (TOML) with strict
key checking, plus CLI-flag overrides and a serializer used to echo the fully
resolved configuration into each output directory."""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:            # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .decoder import DecoderSpec
from .embeddings import ENCODER_NAMES
from .models import MappingKind
from .synthgen import SynthConfig

ALL_MODEL_NAMES = tuple(k.value for k in MappingKind)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MappingTrainConfig:
    models: tuple[str, ...] = ("linear_lag", "rnn")
    lam: float = 0.5
    dropout: float = 0.1
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 8
    max_epochs: int = 200
    patience: int = 20
    holdout_trials: int = 2

    def __post_init__(self):
        unknown = [m for m in self.models if m not in ALL_MODEL_NAMES]
        if unknown:
            raise ConfigError(f"unknown model kinds {unknown}; choose from {ALL_MODEL_NAMES}")


@dataclass(frozen=True)
class PipelineConfig:
    encoders: tuple[str, ...] = ("combined",)
    subjects: tuple[str, ...] = ()      # empty = all subjects
    top_k: int = 20
    n_null_draws: int = 100_000
    scaling_draws: int = 10

    def __post_init__(self):
        unknown = [e for e in self.encoders if e not in ENCODER_NAMES]
        if unknown:
            raise ConfigError(f"unknown encoders {unknown}; choose from {ENCODER_NAMES}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    jobs: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    data: SynthConfig = field(default_factory=SynthConfig)
    mapping: MappingTrainConfig = field(default_factory=MappingTrainConfig)
    decoder: DecoderSpec = field(default_factory=DecoderSpec)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    run: RunConfig = field(default_factory=RunConfig)


_SECTIONS = {
    "data": SynthConfig,
    "mapping": MappingTrainConfig,
    "decoder": DecoderSpec,
    "pipeline": PipelineConfig,
    "run": RunConfig,
}

_LIST_FIELDS = {"models", "encoders", "subjects", "dilations"}


def _coerce(cls, section: str, values: dict):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {unknown} "
                          f"(known: {sorted(known)})")
    kwargs = {}
    for name, v in values.items():
        if name in _LIST_FIELDS:
            if not isinstance(v, list):
                raise ConfigError(f"[{section}] {name} must be a list")
            v = tuple(v)
        kwargs[name] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections: {unknown} (known: {sorted(_SECTIONS)})")
    kwargs = {}
    for section, cls in _SECTIONS.items():
        values = raw.get(section, {})
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        kwargs[section] = _coerce(cls, section, values)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value {v!r}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Resolved configuration as TOML; parse_config round-trips it exactly."""
    lines = []
    for section, _cls in _SECTIONS.items():
        lines.append(f"[{section}]")
        for f in fields(getattr(cfg, section)):
            v = getattr(getattr(cfg, section), f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_toml_value(v)}")
        lines.append("")
    return "\n".join(lines)


def apply_overrides(cfg: ExperimentConfig, seed: int | None = None,
                    models: str | None = None, encoders: str | None = None,
                    subjects: str | None = None, jobs: int | None = None) -> ExperimentConfig:
    """Apply CLI flag values on top of the file-derived configuration."""
    if seed is not None:
        cfg = replace(cfg, run=replace(cfg.run, seed=seed),
                      data=replace(cfg.data, seed=seed))
    if models is not None:
        names = tuple(m.strip() for m in models.split(",") if m.strip())
        cfg = replace(cfg, mapping=replace(cfg.mapping, models=names))
    if encoders is not None:
        names = tuple(e.strip() for e in encoders.split(",") if e.strip())
        cfg = replace(cfg, pipeline=replace(cfg.pipeline, encoders=names))
    if subjects is not None:
        names = tuple(s.strip() for s in subjects.split(",") if s.strip())
        cfg = replace(cfg, pipeline=replace(cfg.pipeline, subjects=names))
    if jobs is not None:
        cfg = replace(cfg, run=replace(cfg.run, jobs=jobs))
    return cfg
