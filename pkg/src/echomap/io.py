"""On-disk formats: dataset directories, tensor checkpoints, embedding TSV
files and CSV report tables.

All array payloads are 32-bit little-endian row-major; indexes and metadata
are JSON.  Writers are deterministic: identical inputs produce byte-identical
files (no timestamps inside any payload).
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .core import (
    ALL_CLASSES,
    EmbeddingTable,
    PairedSession,
    ParameterStore,
    StimulusClass,
    TrialTensor,
    Vocabulary,
    WordEvent,
)
from .decoder import DecoderSpec, TrainedDecoder
from .models import MappingKind, MappingSpec, TrainedMapping
from .prep import LagSpec
from .synthgen import GroundTruth, SynthConfig, SyntheticDataset

DATASET_FORMAT = "echomap-dataset"
CHECKPOINT_FORMAT = "echomap-checkpoint"
TABLE_FORMAT = "echomap-table"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """A file does not match the expected on-disk contract."""


def _check_format(obj: dict, expected: str, path) -> None:
    if obj.get("format") != expected:
        raise FormatError(f"{path}: expected format {expected!r}, got {obj.get('format')!r}")
    if obj.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {obj.get('version')!r}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


_write_json = write_json


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_array_f32(path: Path, arr: np.ndarray) -> None:
    np.ascontiguousarray(arr, dtype="<f4").tofile(path)


def read_array_f32(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise FormatError(f"{path}: expected {expected} float32 values, found {arr.size}")
    return arr.reshape(shape).astype(np.float64)


# ---------------------------------------------------------------------------
# Dataset directories


def save_dataset(dataset: SyntheticDataset, out_dir) -> Path:
    """Write a dataset directory: manifest.json, annotations.json, per-trial
    float32 binaries and the generative ground truth."""
    out = Path(out_dir)
    (out / "trials").mkdir(parents=True, exist_ok=True)
    (out / "ground_truth").mkdir(exist_ok=True)

    trial_index = []
    for session in dataset.sessions:
        for cond_name, cond in (("imagined", session.imagined), ("listened", session.listened)):
            for sc in ALL_CLASSES:
                for i, trial in enumerate(cond[sc]):
                    fname = f"trials/{session.subject_id}_{cond_name}_{sc.value}_{i:02d}.f32"
                    write_array_f32(out / fname, trial.data)
                    trial_index.append({
                        "subject": session.subject_id,
                        "condition": cond_name,
                        "stimulus_class": sc.value,
                        "trial": i,
                        "trial_id": trial.trial_id,
                        "file": fname,
                        "n_channels": trial.n_channels,
                        "n_samples": trial.n_samples,
                    })

    gt = dataset.ground_truth
    write_array_f32(out / "ground_truth/kernel.f32", gt.kernel)
    mixing_files = {}
    for sid, a in sorted(gt.mixing.items()):
        fname = f"ground_truth/mixing_{sid}.f32"
        write_array_f32(out / fname, a)
        mixing_files[sid] = {"file": fname, "shape": list(a.shape)}

    manifest = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "config": _jsonable(dataclasses.asdict(dataset.config)),
        "subjects": list(dataset.subject_ids),
        "vocabulary": list(dataset.vocabulary.words),
        "sample_rate_hz": dataset.config.sample_rate_hz,
        "trials": trial_index,
        "ground_truth": {
            "kernel_file": "ground_truth/kernel.f32",
            "kernel_len": int(gt.kernel.shape[0]),
            "max_lag": gt.max_lag,
            "attenuation": gt.attenuation,
            "mapping_kind": gt.mapping_kind,
            "noise_sd_listened": gt.noise_sd_listened,
            "noise_sd_imagined": gt.noise_sd_imagined,
            "mixing": mixing_files,
        },
    }
    _write_json(out / "manifest.json", manifest)

    annotations = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "word_events": [
            {
                "word": e.word,
                "onset_s": e.onset_s,
                "stimulus_class": e.stimulus_class.value,
                "trial": e.trial_index,
            }
            # every synthetic session shares one schedule; persist it once
            for e in (dataset.sessions[0].word_events if dataset.sessions else ())
        ],
    }
    _write_json(out / "annotations.json", annotations)
    return out


def load_dataset(in_dir) -> SyntheticDataset:
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text(encoding="utf-8"))
    _check_format(manifest, DATASET_FORMAT, src / "manifest.json")
    annotations = json.loads((src / "annotations.json").read_text(encoding="utf-8"))
    _check_format(annotations, DATASET_FORMAT, src / "annotations.json")

    cfg = SynthConfig(**manifest["config"])
    fs = manifest["sample_rate_hz"]
    vocab = Vocabulary(tuple(manifest["vocabulary"]))
    events = tuple(
        WordEvent(e["word"], e["onset_s"], StimulusClass(e["stimulus_class"]), e["trial"])
        for e in annotations["word_events"]
    )

    by_subject: dict[str, dict[str, dict[StimulusClass, list]]] = {
        sid: {"imagined": {sc: [] for sc in ALL_CLASSES},
              "listened": {sc: [] for sc in ALL_CLASSES}}
        for sid in manifest["subjects"]
    }
    for entry in manifest["trials"]:
        data = read_array_f32(src / entry["file"], (entry["n_channels"], entry["n_samples"]))
        trial = TrialTensor(data, fs, entry["trial_id"])
        sc = StimulusClass(entry["stimulus_class"])
        by_subject[entry["subject"]][entry["condition"]][sc].append((entry["trial"], trial))

    sessions = []
    for sid in manifest["subjects"]:
        conds = by_subject[sid]
        sessions.append(PairedSession(
            sid,
            {sc: tuple(t for _, t in sorted(conds["imagined"][sc])) for sc in ALL_CLASSES},
            {sc: tuple(t for _, t in sorted(conds["listened"][sc])) for sc in ALL_CLASSES},
            events,
        ))

    g = manifest["ground_truth"]
    kernel = read_array_f32(src / g["kernel_file"], (g["kernel_len"],))
    mixing = {sid: read_array_f32(src / m["file"], tuple(m["shape"]))
              for sid, m in g["mixing"].items()}
    gt = GroundTruth(kernel, g["max_lag"], g["attenuation"], g["mapping_kind"],
                     mixing, g["noise_sd_listened"], g["noise_sd_imagined"])
    return SyntheticDataset(tuple(sessions), gt, vocab, cfg)


# ---------------------------------------------------------------------------
# Checkpoints: JSON index + one raw little-endian blob


def _dtype_code(arr: np.ndarray) -> str:
    if np.issubdtype(arr.dtype, np.floating):
        return "<f4"
    if np.issubdtype(arr.dtype, np.integer):
        return "<i8"
    raise FormatError(f"unsupported tensor dtype {arr.dtype}")


def save_tensors(path_base, groups: dict[str, ParameterStore | dict], meta: dict) -> Path:
    """Write tensor groups as <base>.json (index) + <base>.bin (blob).

    Float tensors are stored as little-endian float32; values must already be
    float32-representable for the round-trip to be bitwise exact.
    """
    base = Path(path_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    index = []
    chunks = []
    offset = 0
    for group, store in groups.items():
        items = store if isinstance(store, dict) else dict(iter(store))
        for name, arr in items.items():
            arr = np.asarray(arr)
            code = _dtype_code(arr)
            raw = np.ascontiguousarray(arr, dtype=code).tobytes()
            index.append({
                "group": group,
                "name": name,
                "shape": list(arr.shape),
                "dtype": code,
                "offset": offset,
                "nbytes": len(raw),
            })
            chunks.append(raw)
            offset += len(raw)
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": FORMAT_VERSION,
        "meta": _jsonable(meta),
        "tensors": index,
    }
    _write_json(base.with_suffix(".json"), obj)
    base.with_suffix(".bin").write_bytes(b"".join(chunks))
    return base


def load_tensors(path_base) -> tuple[dict[str, ParameterStore], dict]:
    base = Path(path_base)
    obj = json.loads(base.with_suffix(".json").read_text(encoding="utf-8"))
    _check_format(obj, CHECKPOINT_FORMAT, base.with_suffix(".json"))
    blob = base.with_suffix(".bin").read_bytes()
    groups: dict[str, dict[str, np.ndarray]] = {}
    for t in obj["tensors"]:
        raw = blob[t["offset"]:t["offset"] + t["nbytes"]]
        arr = np.frombuffer(raw, dtype=t["dtype"]).reshape(t["shape"])
        if t["dtype"] == "<f4":
            arr = arr.astype(np.float64)
        else:
            arr = arr.astype(np.int64)
        groups.setdefault(t["group"], {})[t["name"]] = arr
    return {g: ParameterStore(d) for g, d in groups.items()}, obj["meta"]


def _spec_to_dict(spec) -> dict:
    d = dataclasses.asdict(spec)
    if "kind" in d:
        d["kind"] = spec.kind.value
    return _jsonable(d)


def save_mapping(path_base, mapping: TrainedMapping) -> Path:
    meta = {
        "kind": "mapping",
        "spec": _spec_to_dict(mapping.spec),
        "train_meta": _jsonable(mapping.meta),
    }
    return save_tensors(path_base, {"params": mapping.params}, meta)


def load_mapping(path_base) -> TrainedMapping:
    groups, meta = load_tensors(path_base)
    if meta.get("kind") != "mapping":
        raise FormatError(f"{path_base}: not a mapping checkpoint")
    sd = dict(meta["spec"])
    sd["kind"] = MappingKind(sd["kind"])
    sd["lag"] = LagSpec(**sd["lag"])
    spec = MappingSpec(**sd)
    return TrainedMapping(spec, groups["params"], meta["train_meta"])


def save_decoder(path_base, decoder: TrainedDecoder) -> Path:
    vocab = decoder.vocab
    meta = {
        "kind": "decoder",
        "spec": _spec_to_dict(decoder.spec),
        "n_channels": decoder.n_channels,
        "window_samples": decoder.window_samples,
        "encoder_name": decoder.table.encoder_name,
        "vocabulary": list(vocab.words),
        "train_meta": _jsonable(decoder.meta),
    }
    groups = {
        "encoder": decoder.encoder_params,
        "projector": decoder.projector_params,
        "table": {"vectors": decoder.table.matrix(vocab)},
        "cache": {"word_embeddings": decoder.cache},
    }
    return save_tensors(path_base, groups, meta)


def load_decoder(path_base) -> TrainedDecoder:
    groups, meta = load_tensors(path_base)
    if meta.get("kind") != "decoder":
        raise FormatError(f"{path_base}: not a decoder checkpoint")
    sd = dict(meta["spec"])
    sd["dilations"] = tuple(sd["dilations"])
    spec = DecoderSpec(**sd)
    vocab = Vocabulary(tuple(meta["vocabulary"]))
    vectors = groups["table"]["vectors"]
    table = EmbeddingTable(meta["encoder_name"],
                           {w: vectors[i] for i, w in enumerate(vocab)})
    return TrainedDecoder(spec, meta["n_channels"], meta["window_samples"],
                          groups["encoder"], groups["projector"], table, vocab,
                          groups["cache"]["word_embeddings"], meta["train_meta"])


# ---------------------------------------------------------------------------
# Embedding tables (UTF-8 TSV, language-neutral contract)


def write_embedding_tsv(table: EmbeddingTable, path) -> Path:
    """First line '#encoder=<name> dim=<D> version=1', then word<TAB>v1..vD."""
    path = Path(path)
    lines = [f"#encoder={table.encoder_name} dim={table.dim} version={FORMAT_VERSION}"]
    for word in sorted(table.vectors):
        vec = table.vectors[word]
        lines.append(word + "\t" + "\t".join(repr(float(v)) for v in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_embedding_tsv(path) -> EmbeddingTable:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: missing '#encoder=...' header line")
    header = dict(part.split("=", 1) for part in lines[0][1:].split())
    for key in ("encoder", "dim", "version"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    if int(header["version"]) != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {header['version']}")
    dim = int(header["dim"])
    vectors: dict[str, np.ndarray] = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != dim + 1:
            raise FormatError(f"{path}:{ln}: expected {dim + 1} fields, got {len(parts)}")
        word = parts[0]
        if word in vectors:
            raise FormatError(f"{path}:{ln}: duplicate word {word!r}")
        vectors[word] = np.array([float(v) for v in parts[1:]])
    if not vectors:
        raise FormatError(f"{path}: no embedding rows")
    return EmbeddingTable(header["encoder"], vectors)


# ---------------------------------------------------------------------------
# CSV report tables with JSON metadata sidecars


def write_table_csv(path, fieldnames: list[str], rows: list[dict], meta: dict) -> Path:
    """Emit a report table: schema header row + data rows, and a JSON metadata
    header file alongside (<name>.meta.json)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})
    sidecar = {
        "format": TABLE_FORMAT,
        "version": FORMAT_VERSION,
        "columns": fieldnames,
        "n_rows": len(rows),
        **_jsonable(meta),
    }
    _write_json(path.with_suffix(path.suffix + ".meta.json"), sidecar)
    return path


def _csv_cell(v):
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_table_csv(path) -> tuple[list[dict], dict]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text(encoding="utf-8"))
    _check_format(meta, TABLE_FORMAT, path)
    return rows, meta
