"""Command-line interface; each subcommand composes module operations.

Exit codes: 0 success, 1 domain error (message to stderr), 2 usage error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
from filelock import FileLock

from . import audio_models, text_model as text_mod
from .audio_io import load_wav
from .config import AppConfig, load_config
from .corpora import scan_corpus
from .errors import AffectFuseError, EmptyDataset
from .evaluation import emit_report, evaluate, latency_benchmark, noise_sweep, per_corpus_breakdown
from .features import FeatureCache, ManifestFeatureSource
from .manifest import Corpus, build_manifest, load_manifest, save_manifest
from .pipeline import FusedPipeline
from .textdata import load_text_dataset
from .transcription import select_backend


def domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AffectFuseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"io error: {exc}", err=True)
            sys.exit(1)
    return wrapper


def _load_app_config(config_path: str | None) -> AppConfig:
    return load_config(config_path) if config_path else load_config()


def _parse_floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.split(",") if tok.strip()]


@click.group()
def main():
    """Hybrid speech/text emotion recognition toolkit."""


@main.command()
@click.option("--corpus", "corpora", multiple=True, type=click.Choice([c.value for c in Corpus]))
@click.option("--root", "roots", multiple=True, type=click.Path(exists=True, file_okay=False))
@click.option("--tweets", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--content-col", default="content", show_default=True)
@click.option("--label-col", default="label", show_default=True)
@click.option("--fractions", default="0.8,0.1,0.1", show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@domain_errors
def ingest(corpora, roots, tweets, content_col, label_col, fractions, seed, out):
    """Scan corpora and/or a tweet CSV into a split manifest."""
    if len(corpora) != len(roots):
        raise click.UsageError("--corpus and --root must be given in matching pairs")
    if not corpora and not tweets:
        raise click.UsageError("nothing to ingest: give --corpus/--root and/or --tweets")

    records = []
    n_skipped = 0
    for corpus, root in zip(corpora, roots):
        for record, path, error in scan_corpus(corpus, root):
            if record is None:
                n_skipped += 1
                click.echo(f"skip {path}: {error}", err=True)
            else:
                records.append(record)
    if tweets:
        text_records, report = load_text_dataset(
            tweets, schema={"content": content_col, "label": label_col}
        )
        records.extend(text_records)
        n_skipped += report.n_skipped

    if not records:
        raise EmptyDataset("no usable records found")
    fracs = _parse_floats(fractions)
    manifest = build_manifest(records, tuple(fracs), seed)
    save_manifest(manifest, out)
    click.echo(f"wrote {out}: {len(manifest.records)} records ({n_skipped} skipped)")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--cache-dir", default=None, type=click.Path(file_okay=False))
@domain_errors
def featurize(manifest_path, config_path, cache_dir):
    """Precompute MFCC features for every audio record into the cache."""
    cfg = _load_app_config(config_path)
    manifest = load_manifest(manifest_path)
    cache = FeatureCache(cache_dir or cfg.paths.cache_dir)
    source = ManifestFeatureSource(cfg.feature, cache=cache)
    records = manifest.audio_records()
    for record in records:
        source.features_for(record)
    click.echo(f"featurized {len(records)} clips into {cache.cache_dir}")


def _train_lock(artifact_dir: Path) -> FileLock:
    artifact_dir.mkdir(parents=True, exist_ok=True)
    return FileLock(artifact_dir / ".train.lock")


@main.command("train-audio")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["cnn", "lstm"]), default=None)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--epochs", default=None, type=int)
@click.option("--batch-size", default=None, type=int)
@click.option("--learning-rate", default=None, type=float)
@click.option("--seed", default=None, type=int)
@domain_errors
def train_audio(manifest_path, config_path, kind, out_dir, epochs, batch_size, learning_rate, seed):
    """Train the CNN or LSTM acoustic classifier on a manifest."""
    cfg = _load_app_config(config_path)
    manifest = load_manifest(manifest_path)
    model_cfg = cfg.audio_model.resolved(cfg.feature)
    if kind:
        model_cfg = model_cfg.model_copy(update={"kind": kind})
    hyper = audio_models.TrainHyper(
        epochs=epochs or 50,
        batch_size=batch_size or 32,
        learning_rate=learning_rate or 1e-3,
        seed=seed if seed is not None else 42,
    )
    out = Path(out_dir or cfg.paths.audio_model_dir or Path(cfg.paths.artifact_dir) / "audio")
    with _train_lock(Path(cfg.paths.artifact_dir)):
        source = ManifestFeatureSource(cfg.feature, cache=FeatureCache(cfg.paths.cache_dir))
        model = audio_models.build_model(model_cfg, seed=hyper.seed)
        report = audio_models.train(model, manifest, source, hyper)
        audio_models.save_model(model, out)
        (out / "train_report.json").write_text(
            json.dumps(
                {
                    "best_epoch": report.best_epoch,
                    "best_val_accuracy": report.best_val_accuracy,
                    "final_train_loss": report.final_train_loss,
                    "wall_seconds": report.wall_seconds,
                },
                indent=2,
            )
        )
    click.echo(
        f"trained {model_cfg.kind} for {len(report.epochs)} epochs; "
        f"best val accuracy {report.best_val_accuracy:.4f} (epoch {report.best_epoch}); saved to {out}"
    )


@main.command("train-text")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--epochs", default=None, type=int)
@click.option("--batch-size", default=None, type=int)
@click.option("--learning-rate", default=None, type=float)
@click.option("--seed", default=None, type=int)
@domain_errors
def train_text(manifest_path, config_path, out_dir, epochs, batch_size, learning_rate, seed):
    """Fine-tune the transformer text classifier on a manifest."""
    cfg = _load_app_config(config_path)
    manifest = load_manifest(manifest_path)
    hyper = text_mod.TextTrainHyper(
        epochs=epochs or 3,
        batch_size=batch_size or 16,
        learning_rate=learning_rate or 2e-5,
        seed=seed if seed is not None else 42,
    )
    out = Path(out_dir or cfg.paths.text_model_dir or Path(cfg.paths.artifact_dir) / "text")
    with _train_lock(Path(cfg.paths.artifact_dir)):
        model, report = text_mod.fine_tune(cfg.text_model, manifest, hyper)
        text_mod.save_text_model(model, out)
    click.echo(
        f"fine-tuned {cfg.text_model.pretrained_id} for {len(report.epochs)} epochs; "
        f"best val accuracy {report.best_val_accuracy:.4f}; saved to {out}"
    )


def _audio_predict_fn(cfg: AppConfig, model_dir: str | None):
    model = audio_models.load_model(
        Path(model_dir or cfg.paths.audio_model_dir or Path(cfg.paths.artifact_dir) / "audio")
    )
    source = ManifestFeatureSource(cfg.feature, cache=FeatureCache(cfg.paths.cache_dir))
    return model, source, lambda record: audio_models.predict(model, source.features_for(record))


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--audio-model", "audio_model_dir", default=None, type=click.Path(exists=True))
@click.option("--text-model", "text_model_dir", default=None, type=click.Path(exists=True))
@click.option("--split", default="test", show_default=True)
@click.option("--per-corpus", is_flag=True, default=False)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@domain_errors
def evaluate_cmd(manifest_path, config_path, audio_model_dir, text_model_dir, split, per_corpus, out_dir):
    """Evaluate saved models on a manifest split and emit reports."""
    cfg = _load_app_config(config_path)
    manifest = load_manifest(manifest_path)
    out = Path(out_dir or cfg.paths.report_dir)

    results = []
    audio_records = manifest.audio_records(split)
    if audio_records:
        _, _, predict_fn = _audio_predict_fn(cfg, audio_model_dir)
        if per_corpus:
            results.extend(per_corpus_breakdown(predict_fn, manifest, split))
        else:
            results.append(evaluate(predict_fn, audio_records, slice_id=f"audio_{split}"))

    text_records = manifest.text_records(split)
    if text_records and (text_model_dir or (Path(cfg.paths.artifact_dir) / "text" / "metadata.json").exists()):
        model = text_mod.load_text_model(
            Path(text_model_dir or cfg.paths.text_model_dir or Path(cfg.paths.artifact_dir) / "text")
        )
        results.append(
            evaluate(
                lambda r: text_mod.predict_text(model, r.content),
                text_records,
                slice_id=f"text_{split}",
            )
        )

    written = emit_report(results, out)
    for res in results:
        click.echo(f"{res.slice_id}: accuracy {res.overall_accuracy:.4f} over {res.n_records} records")
    click.echo(f"report files: {', '.join(str(p) for p in written)}")


main.add_command(evaluate_cmd, name="evaluate")


@main.command("noise-sweep")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--audio-model", "audio_model_dir", default=None, type=click.Path(exists=True))
@click.option("--snrs", default="30,20,10,0", show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--split", default="test", show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@domain_errors
def noise_sweep_cmd(manifest_path, config_path, audio_model_dir, snrs, seed, split, out_dir):
    """Accuracy under additive noise at each SNR (clean point included)."""
    cfg = _load_app_config(config_path)
    manifest = load_manifest(manifest_path)
    model, source, _ = _audio_predict_fn(cfg, audio_model_dir)
    records = manifest.audio_records(split)

    def predict_clip(clip):
        from .features import mfcc
        return audio_models.predict(model, mfcc(clip, cfg.feature))

    curve = noise_sweep(
        predict_clip, records, _parse_floats(snrs), seed,
        load_clip=source.load_clip, base_eval_id=f"audio_{split}",
    )
    out = Path(out_dir or cfg.paths.report_dir)
    emit_report([], out, curves=[curve])
    for snr, acc in curve.points:
        label = "clean" if snr == float("inf") else f"{snr:g} dB"
        click.echo(f"{label}: accuracy {acc:.4f}")


def _build_pipeline(cfg: AppConfig, audio_model_dir, text_model_dir) -> FusedPipeline:
    audio_model = audio_models.load_model(
        Path(audio_model_dir or cfg.paths.audio_model_dir or Path(cfg.paths.artifact_dir) / "audio")
    )
    text_dir = Path(text_model_dir or cfg.paths.text_model_dir or Path(cfg.paths.artifact_dir) / "text")
    text_model = text_mod.load_text_model(text_dir) if (text_dir / "metadata.json").exists() else None
    backend = select_backend(cfg.transcription) if cfg.transcription.backend else None
    return FusedPipeline(
        feature_cfg=cfg.feature,
        audio_model=audio_model,
        text_model=text_model,
        backend=backend,
        fusion_cfg=cfg.fusion,
        transcription_timeout_ms=cfg.transcription.timeout_ms,
        transcription_max_retries=cfg.transcription.max_retries,
        transcription_backoff_ms=cfg.transcription.backoff_ms,
        audio_only_fallback=cfg.service.audio_only_fallback,
    )


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--audio-model", "audio_model_dir", default=None, type=click.Path(exists=True))
@click.option("--text-model", "text_model_dir", default=None, type=click.Path(exists=True))
@click.option("--split", default="test", show_default=True)
@click.option("--n-warmup", default=3, show_default=True)
@click.option("--n-measure", default=20, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@domain_errors
def bench(manifest_path, config_path, audio_model_dir, text_model_dir, split, n_warmup, n_measure, out_dir):
    """Latency benchmark of the full pipeline over manifest clips."""
    cfg = _load_app_config(config_path)
    manifest = load_manifest(manifest_path)
    pipeline = _build_pipeline(cfg, audio_model_dir, text_model_dir)
    records = manifest.audio_records(split)[:n_measure]
    source = ManifestFeatureSource(cfg.feature)
    clips = [source.load_clip(r) for r in records]
    report = latency_benchmark(pipeline, clips, n_warmup, n_measure)
    out = Path(out_dir or cfg.paths.report_dir)
    emit_report([], out, latency=report)
    for stage in sorted(report.stages):
        st = report.stages[stage]
        click.echo(f"{stage}: mean {st.mean_ms:.1f} ms, p50 {st.p50_ms:.1f}, p95 {st.p95_ms:.1f}")


@main.command()
@click.option("--audio", "audio_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--audio-model", "audio_model_dir", default=None, type=click.Path(exists=True))
@click.option("--text-model", "text_model_dir", default=None, type=click.Path(exists=True))
@click.option("--transcript", default=None)
@domain_errors
def predict(audio_path, config_path, audio_model_dir, text_model_dir, transcript):
    """Fused prediction for one WAV file; one JSON line to stdout."""
    cfg = _load_app_config(config_path)
    pipeline = _build_pipeline(cfg, audio_model_dir, text_model_dir)
    clip = load_wav(audio_path, cfg.feature.target_sample_rate)
    result = pipeline.predict_clip(clip, transcript=transcript, clip_id=Path(audio_path).stem)
    fused = result.prediction
    payload = {
        "label": fused.label.label,
        "probs": fused.distribution.as_dict(),
        "modalities_used": sorted(fused.modalities_used),
        "transcript": result.transcript,
        "timing_ms": {k: round(v, 3) for k, v in result.timings_ms.items()},
    }
    click.echo(json.dumps(payload, sort_keys=True))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@domain_errors
def serve(config_path):
    """Load models and run the HTTP scoring service."""
    from .service import serve as run_service

    cfg = _load_app_config(config_path)
    run_service(cfg)


if __name__ == "__main__":
    main()
