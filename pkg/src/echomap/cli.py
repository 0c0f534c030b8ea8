"""Command-line front end.

Every command is a pure function of (config, flags): equal inputs produce
byte-identical outputs.  Wall-clock timestamps are confined to the run.log
sidecar so payload files stay reproducible.
"""

from __future__ import annotations

import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import io as eio
from .config import (
    ALL_MODEL_NAMES,
    ExperimentConfig,
    apply_overrides,
    load_config,
    serialize_config,
)
from .core import ALL_CLASSES
from .decoder import rank_cdf, rank_retrieve_batch, top_k_words, train_decoder
from .embeddings import make_synthetic_table
from .evalmap import (
    EvalCondition,
    build_train_pairs,
    correlation_classify,
    derive_seed,
    evaluate_pairs,
    fit_mapping,
    make_class_templates,
    run_loso,
    scaling_curve,
    session_pairs,
)
from .models import MappingKind, MappingSpec, OptimConfig, forward
from .pipeline import (
    collect_poem_windows,
    consistency_analysis,
    ranks_vs_uniform,
    run_zero_shot,
)
from .prep import WordWindowSpec, zscore_channels
from .stats import format_p, paired_t
from .synthgen import generate_dataset

OUTPUT_ROOT_ENV = "ECHOMAP_OUT"


def _out_dir(out: str | None) -> Path:
    root = out or os.environ.get(OUTPUT_ROOT_ENV) or "echomap_out"
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _log(out: Path, message: str) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with (out / "run.log").open("a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message}\n")


def _prepare(config, seed, out, models, encoders, subjects, jobs):
    cfg = load_config(config) if config else ExperimentConfig()
    cfg = apply_overrides(cfg, seed=seed, models=models, encoders=encoders,
                          subjects=subjects, jobs=jobs)
    out_path = _out_dir(out)
    (out_path / "resolved_config.toml").write_text(serialize_config(cfg), encoding="utf-8")
    _log(out_path, f"command: {' '.join(sys.argv[1:])}")
    return cfg, out_path


def _get_dataset(cfg: ExperimentConfig, data: str | None):
    if data:
        return eio.load_dataset(data)
    return generate_dataset(cfg.data)


def _mapping_spec(cfg: ExperimentConfig, name: str) -> MappingSpec:
    return MappingSpec(kind=MappingKind(name), n_channels=cfg.data.n_channels,
                       lam=cfg.mapping.lam, dropout=cfg.mapping.dropout)


def _optim(cfg: ExperimentConfig) -> OptimConfig:
    m = cfg.mapping
    return OptimConfig(lr=m.lr, weight_decay=m.weight_decay, batch_size=m.batch_size,
                       max_epochs=m.max_epochs, patience=m.patience)


def _window_spec(cfg: ExperimentConfig) -> WordWindowSpec:
    return WordWindowSpec(cfg.data.window_pre_s, cfg.data.window_post_s)


def _common(fn):
    fn = click.option("--jobs", type=int, default=None,
                      help="Worker count hint (recorded; execution is sequential).")(fn)
    fn = click.option("--subjects", default=None,
                      help="Comma-separated subject IDs (default: all).")(fn)
    fn = click.option("--encoders", default=None,
                      help="Comma-separated embedding encoder names.")(fn)
    fn = click.option("--models", default=None,
                      help=f"Comma-separated mapping kinds from {ALL_MODEL_NAMES}.")(fn)
    fn = click.option("--out", default=None,
                      help=f"Output directory (default: ${OUTPUT_ROOT_ENV} or ./echomap_out).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Master seed override.")(fn)
    fn = click.option("--config", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="TOML configuration file.")(fn)
    return fn


def _data_opt(fn):
    return click.option("--data", type=click.Path(exists=True, file_okay=False), default=None,
                        help="Existing dataset directory (default: generate from config).")(fn)


@click.group()
def main():
    """Imagined-to-listened mapping and word decoding experiments."""


@main.command()
@_common
def generate(config, seed, out, models, encoders, subjects, jobs):
    """Generate the synthetic paired dataset and write it to OUT/dataset."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = generate_dataset(cfg.data)
    target = eio.save_dataset(dataset, out_path / "dataset")
    _log(out_path, f"generate: wrote {len(dataset.sessions)} subjects to {target}")
    click.echo(f"dataset written to {target}")


@main.command("train-mapping")
@_common
@_data_opt
def train_mapping_cmd(config, seed, out, models, encoders, subjects, jobs, data):
    """Train one mapping model per requested kind and save checkpoints."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    subject_ids = list(cfg.pipeline.subjects or dataset.subject_ids)
    train_pairs, unseen_pairs = build_train_pairs(dataset, subject_ids,
                                                  cfg.mapping.holdout_trials)
    rows = []
    trained = []
    for m_i, name in enumerate(cfg.mapping.models):
        spec = _mapping_spec(cfg, name)
        model = fit_mapping(spec, train_pairs, unseen_pairs,
                            derive_seed(cfg.run.seed, 100, m_i), _optim(cfg))
        model.meta["training_subjects"] = subject_ids
        eio.save_mapping(out_path / "mappings" / name, model)
        trained.append(name)
        for cond, pairs in (("train", train_pairs), ("unseen_trials", unseen_pairs)):
            mean_r, _ = evaluate_pairs(model, pairs)
            rows.append({"model": name, "condition": cond, "mean_r": mean_r,
                         "n_pairs": len(pairs)})
        _log(out_path, f"train-mapping: {name} done")
    eio.write_json(out_path / "mappings" / "manifest.json",
                    {"format": "echomap-mappings", "version": 1, "models": trained,
                     "subjects": subject_ids, "seed": cfg.run.seed})
    eio.write_table_csv(out_path / "mapping_train.csv",
                        ["model", "condition", "mean_r", "n_pairs"], rows,
                        {"table": "mapping_train", "seed": cfg.run.seed})
    click.echo(f"trained {len(trained)} model(s): {', '.join(trained)}")


@main.command("eval-mapping")
@_common
@_data_opt
def eval_mapping_cmd(config, seed, out, models, encoders, subjects, jobs, data):
    """Leave-one-subject-out evaluation with matched derangement controls."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    rows, stats = [], {}
    for name in cfg.mapping.models:
        records = run_loso(dataset, _mapping_spec(cfg, name), seed=cfg.run.seed,
                           optim=_optim(cfg), holdout_trials=cfg.mapping.holdout_trials)
        for r in records:
            rows.append({"model": name, "subject": r.subject_id,
                         "condition": r.condition.value, "null": int(r.is_null),
                         "mean_r": r.mean_r, "failed": int(r.failed)})
        real = [r.mean_r for r in records
                if r.condition is EvalCondition.LOSO and not r.is_null and not r.failed]
        null = [r.mean_r for r in records
                if r.condition is EvalCondition.LOSO and r.is_null and not r.failed]
        if len(real) >= 2 and len(real) == len(null):
            t = paired_t(real, null)
            stats[name] = {"loso_real_mean_r": float(np.mean(real)),
                           "loso_null_mean_r": float(np.mean(null)),
                           "t": t.statistic, "df": t.df, "p": format_p(t.p_value)}
        _log(out_path, f"eval-mapping: {name} done")
    eio.write_table_csv(out_path / "eval_records.csv",
                        ["model", "subject", "condition", "null", "mean_r", "failed"],
                        rows, {"table": "eval_records", "seed": cfg.run.seed})
    eio.write_json(out_path / "eval_stats.json", stats)
    click.echo(f"wrote {len(rows)} evaluation records")


@main.command()
@_common
@_data_opt
@click.option("--draws", type=int, default=None, help="Random subsets per size k.")
def scaling(config, seed, out, models, encoders, subjects, jobs, data, draws):
    """Held-out performance versus number of training subjects."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    m = draws or cfg.pipeline.scaling_draws
    rows = []
    for name in cfg.mapping.models:
        points = scaling_curve(dataset, _mapping_spec(cfg, name), m=m, seed=cfg.run.seed,
                               optim=_optim(cfg), holdout_trials=cfg.mapping.holdout_trials)
        rows.extend({"model": name, "subject": p.subject_id, "k": p.k,
                     "mean_r": p.mean_r, "n_draws": len(p.subset_values)}
                    for p in points)
        _log(out_path, f"scaling: {name} done")
    eio.write_table_csv(out_path / "scaling.csv",
                        ["model", "subject", "k", "mean_r", "n_draws"], rows,
                        {"table": "scaling", "seed": cfg.run.seed, "draws": m})
    click.echo(f"wrote {len(rows)} scaling points")


@main.command()
@_common
@_data_opt
def classify(config, seed, out, models, encoders, subjects, jobs, data):
    """Classify predicted trials into the four stimulus conditions."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    results = {}
    for name in cfg.mapping.models:
        spec = _mapping_spec(cfg, name)
        confusion = np.zeros((4, 4), dtype=int)
        confusion2 = np.zeros((2, 2), dtype=int)
        subject_ids = list(dataset.subject_ids)
        for idx, held_out in enumerate(subject_ids):
            others = [s for s in subject_ids if s != held_out]
            train_pairs, unseen_pairs = build_train_pairs(dataset, others,
                                                          cfg.mapping.holdout_trials)
            model = fit_mapping(spec, train_pairs, unseen_pairs,
                                derive_seed(cfg.run.seed, idx, 0), _optim(cfg))
            session = dataset.session(held_out)
            templates = make_class_templates(session)
            preds = [(forward(model, zscore_channels(p.imagined.data)), p.stimulus_class)
                     for p in session_pairs(session)]
            res = correlation_classify(preds, templates)
            confusion += res.counts
            confusion2 += res.counts_coarse
        total = confusion.sum()
        results[name] = {
            "classes": [sc.value for sc in ALL_CLASSES],
            "confusion": confusion.tolist(),
            "confusion_coarse": confusion2.tolist(),
            "accuracy": float(np.trace(confusion) / max(1, total)),
            "accuracy_coarse": float(np.trace(confusion2) / max(1, confusion2.sum())),
        }
        _log(out_path, f"classify: {name} done")
    eio.write_json(out_path / "classification.json",
                    {"format": "echomap-confusion", "version": 1,
                     "seed": cfg.run.seed, "results": results})
    click.echo(f"classification written for {len(results)} model(s)")


@main.command("train-decoder")
@_common
@_data_opt
def train_decoder_cmd(config, seed, out, models, encoders, subjects, jobs, data):
    """Train the contrastive word decoder on listened windows, per encoder."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    subject_ids = list(cfg.pipeline.subjects or dataset.subject_ids)
    sessions = [dataset.session(s) for s in subject_ids]
    windows, words, n_skipped = collect_poem_windows(sessions, "listened", _window_spec(cfg))
    loss_rows, cdf_rows = [], []
    for e_i, enc in enumerate(cfg.pipeline.encoders):
        table = make_synthetic_table(dataset.vocabulary, enc, cfg.run.seed)
        decoder = train_decoder(windows, words, table, dataset.vocabulary, cfg.decoder,
                                seed=derive_seed(cfg.run.seed, 200, e_i),
                                training_subjects=tuple(subject_ids))
        eio.save_decoder(out_path / "decoders" / enc, decoder)
        for h in decoder.meta["history"]:
            loss_rows.append({"encoder": enc, **h})
        outcomes = []
        for s in range(0, len(windows), 256):
            outcomes.extend(rank_retrieve_batch(decoder, windows[s:s + 256],
                                                words[s:s + 256]))
        curve = rank_cdf(outcomes, len(dataset.vocabulary))
        cdf_rows.extend({"encoder": enc, "rank": k + 1, "cdf": float(v)}
                        for k, v in enumerate(curve.cdf))
        _log(out_path, f"train-decoder: {enc} done "
                       f"(R@1={curve.recall_at.get(1, float('nan')):.3f})")
    eio.write_table_csv(out_path / "decoder_loss.csv",
                        ["encoder", "epoch", "train_loss", "val_loss"], loss_rows,
                        {"table": "decoder_loss", "seed": cfg.run.seed,
                         "n_windows": len(windows), "n_skipped": n_skipped})
    eio.write_table_csv(out_path / "decoder_rank_cdf.csv",
                        ["encoder", "rank", "cdf"], cdf_rows,
                        {"table": "decoder_rank_cdf", "seed": cfg.run.seed})
    click.echo(f"trained {len(cfg.pipeline.encoders)} decoder(s)")


@main.command("eval-decoder")
@_common
@_data_opt
@click.option("--checkpoints", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory containing per-encoder decoder checkpoints.")
def eval_decoder_cmd(config, seed, out, models, encoders, subjects, jobs, data, checkpoints):
    """Rank-retrieval evaluation of saved decoders on listened windows."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    subject_ids = list(cfg.pipeline.subjects or dataset.subject_ids)
    sessions = [dataset.session(s) for s in subject_ids]
    windows, words, _ = collect_poem_windows(sessions, "listened", _window_spec(cfg))
    rows = []
    for enc in cfg.pipeline.encoders:
        decoder = eio.load_decoder(Path(checkpoints) / enc)
        outcomes = []
        for s in range(0, len(windows), 256):
            outcomes.extend(rank_retrieve_batch(decoder, windows[s:s + 256],
                                                words[s:s + 256]))
        curve = rank_cdf(outcomes, len(dataset.vocabulary))
        mean_rank = float(np.mean([o.rank for o in outcomes]))
        rows.append({"encoder": enc, "n_windows": len(outcomes),
                     "recall_at_1": curve.recall_at.get(1), "recall_at_5": curve.recall_at.get(5),
                     "recall_at_10": curve.recall_at.get(10), "mean_rank": mean_rank})
        _log(out_path, f"eval-decoder: {enc} done")
    eio.write_table_csv(out_path / "decoder_eval.csv",
                        ["encoder", "n_windows", "recall_at_1", "recall_at_5",
                         "recall_at_10", "mean_rank"], rows,
                        {"table": "decoder_eval", "seed": cfg.run.seed})
    click.echo(f"evaluated {len(rows)} decoder(s)")


@main.command("pipeline")
@_common
@_data_opt
def pipeline_cmd(config, seed, out, models, encoders, subjects, jobs, data):
    """Zero-shot composition: map imagined trials, decode words, rank them."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    dataset = _get_dataset(cfg, data)
    specs = [_mapping_spec(cfg, name) for name in cfg.mapping.models]
    tables = {enc: make_synthetic_table(dataset.vocabulary, enc, cfg.run.seed)
              for enc in cfg.pipeline.encoders}
    runs = run_zero_shot(dataset, specs, cfg.decoder, tables, seed=cfg.run.seed,
                         window_spec=_window_spec(cfg), optim=_optim(cfg),
                         holdout_trials=cfg.mapping.holdout_trials,
                         subjects=list(cfg.pipeline.subjects) or None)
    v = len(dataset.vocabulary)
    rows = []
    for r in runs:
        mean_rank = float(np.mean([o.rank for o in r.outcomes])) if r.outcomes else float("nan")
        p = ranks_vs_uniform(r.outcomes, v, seed=cfg.run.seed).p_value if r.outcomes else 1.0
        rows.append({"subject": r.subject_id, "model": r.mapping_kind,
                     "encoder": r.encoder_name, "n_windows": len(r.outcomes),
                     "mean_rank": mean_rank, "auc_above_chance_pct": r.auc_above_chance_pct,
                     "p_vs_uniform": format_p(p)})
    eio.write_table_csv(out_path / "pipeline_runs.csv",
                        ["subject", "model", "encoder", "n_windows", "mean_rank",
                         "auc_above_chance_pct", "p_vs_uniform"], rows,
                        {"table": "pipeline_runs", "seed": cfg.run.seed})

    k = cfg.pipeline.top_k
    top_sets = {}
    for r in runs:
        if len({o.true_word for o in r.outcomes}) >= k:
            sel, _ = top_k_words({r.encoder_name: r.outcomes}, k)
            top_sets[f"{r.subject_id}:{r.mapping_kind}:{r.encoder_name}"] = set(sel)
    listened_all = [o for r in runs for o in r.listened_outcomes]
    consistency = None
    if len(top_sets) >= 2 and len({o.true_word for o in listened_all}) >= k:
        lis_sel, _ = top_k_words({"listened": listened_all}, k)
        res = consistency_analysis(top_sets, set(lis_sel), vocab_size=v, set_size=k,
                                   n_null_draws=cfg.pipeline.n_null_draws,
                                   seed=cfg.run.seed)
        consistency = {
            "pairwise_mean_jaccard": float(res.pairwise.mean()),
            "vs_listened_mean_jaccard": float(res.vs_listened.mean()),
            "null_mean_jaccard": float(res.null.mean()),
            "p_pairwise": format_p(res.p_pairwise.p_value),
            "p_vs_listened": format_p(res.p_vs_listened.p_value),
        }
    eio.write_json(out_path / "consistency.json",
                    {"format": "echomap-consistency", "version": 1,
                     "seed": cfg.run.seed, "top_k": k,
                     "top_sets": {key: sorted(s) for key, s in sorted(top_sets.items())},
                     "consistency": consistency})
    _log(out_path, f"pipeline: {len(runs)} runs")
    click.echo(f"wrote {len(rows)} pipeline runs")


@main.command()
@_common
@click.option("--results", type=click.Path(exists=True, file_okay=False), default=None,
              help="Results directory to summarize (default: OUT).")
def report(config, seed, out, models, encoders, subjects, jobs, results):
    """Summarize the tables found in a results directory."""
    cfg, out_path = _prepare(config, seed, out, models, encoders, subjects, jobs)
    src = Path(results) if results else out_path
    lines = [f"results: {src}"]
    for csv_path in sorted(src.glob("*.csv")):
        try:
            rows, meta = eio.read_table_csv(csv_path)
        except (FileNotFoundError, eio.FormatError):
            continue
        lines.append(f"\n{csv_path.name}: {len(rows)} rows, columns {meta['columns']}")
        numeric = {}
        for row in rows:
            for key, val in row.items():
                try:
                    numeric.setdefault(key, []).append(float(val))
                except (TypeError, ValueError):
                    pass
        for key, vals in numeric.items():
            if len(vals) == len(rows) and rows:
                lines.append(f"  {key}: mean={np.mean(vals):.6g} "
                             f"min={np.min(vals):.6g} max={np.max(vals):.6g}")
    stats_json = src / "eval_stats.json"
    if stats_json.exists():
        lines.append("\neval_stats.json:")
        lines.append(json.dumps(json.loads(stats_json.read_text()), indent=1, sort_keys=True))
    text = "\n".join(lines) + "\n"
    (out_path / "report.txt").write_text(text, encoding="utf-8")
    click.echo(text)


if __name__ == "__main__":
    main()
