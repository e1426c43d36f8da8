import json
import os
from pathlib import Path

import numpy as np
import pytest

os.environ.setdefault("TRANSFORMERS_VERBOSITY", "error")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")

from affectfuse import audio_models, text_model as text_mod
from affectfuse.features import FeatureConfig, ManifestFeatureSource
from affectfuse.manifest import build_manifest, save_manifest
from affectfuse.corpora import scan_corpus
from affectfuse.textdata import load_text_dataset

from synth import build_tiny_registry, make_tess_corpus, make_tweet_csv, TWEET_LEXICON

DATA_DIR = Path(__file__).parent / "data"

TINY_PRETRAINED_ID = "distilbert-tiny-test"


@pytest.fixture(scope="session")
def fast_feature_cfg() -> FeatureConfig:
    """Cheap DSP settings for unit tests."""
    return FeatureConfig(
        target_sample_rate=8000,
        clip_seconds=0.5,
        frame_length=256,
        hop_length=128,
        n_fft=256,
        n_mels=26,
        n_mfcc=13,
        fmin=0.0,
        fmax=4000.0,
    )


@pytest.fixture(scope="session")
def tiny_registry(tmp_path_factory) -> tuple[Path, str]:
    """Local pretrained-model registry holding one tiny encoder."""
    registry_dir = tmp_path_factory.mktemp("registry")
    corpus_texts = [phrase for phrases in TWEET_LEXICON.values() for phrase in phrases]
    corpus_texts += ["i am feeling today this is honestly right now tbh <url> <user> mood life lol"]
    build_tiny_registry(registry_dir, corpus_texts, pretrained_id=TINY_PRETRAINED_ID)
    return registry_dir, TINY_PRETRAINED_ID


@pytest.fixture(scope="session")
def tiny_text_cfg(tiny_registry) -> text_mod.TextModelConfig:
    registry_dir, pretrained_id = tiny_registry
    return text_mod.TextModelConfig(
        pretrained_id=pretrained_id,
        max_tokens=48,
        registry_dir=str(registry_dir),
        offline=True,
    )


@pytest.fixture(scope="session")
def small_audio_setup(tmp_path_factory):
    """Tiny end-to-end audio stack: TESS-layout corpus, manifest, trained CNN."""
    root = tmp_path_factory.mktemp("small_corpus")
    make_tess_corpus(root, per_class=6, seed=11)
    records = [rec for rec, _, err in scan_corpus("tess", root) if rec is not None]
    manifest = build_manifest(records, (0.7, 0.15, 0.15), seed=5)
    manifest_path = root / "manifest.jsonl"
    save_manifest(manifest, manifest_path)

    feature_cfg = FeatureConfig()
    source = ManifestFeatureSource(feature_cfg)
    model_cfg = audio_models.AudioModelConfig(
        kind="cnn",
        conv_blocks=[(32, 5, 2), (64, 5, 2)],
        dense_width=64,
    ).resolved(feature_cfg)
    model = audio_models.build_model(model_cfg, seed=3)
    hyper = audio_models.TrainHyper(epochs=20, batch_size=16, learning_rate=2e-3, seed=3)
    report = audio_models.train(model, manifest, source, hyper)

    artifact_dir = tmp_path_factory.mktemp("small_artifacts") / "audio"
    audio_models.save_model(model, artifact_dir)
    return {
        "corpus_root": root,
        "manifest": manifest,
        "manifest_path": manifest_path,
        "feature_cfg": feature_cfg,
        "source": source,
        "model": model,
        "model_cfg": model_cfg,
        "report": report,
        "artifact_dir": artifact_dir,
    }


@pytest.fixture(scope="session")
def small_text_setup(tmp_path_factory, tiny_text_cfg):
    """Tiny fine-tuned text model over a synthetic tweet manifest."""
    work = tmp_path_factory.mktemp("small_text")
    csv_path = work / "tweets.csv"
    make_tweet_csv(csv_path, n=240, seed=7)
    records, _ = load_text_dataset(csv_path, schema={"content": "tweet_text", "label": "sentiment"})
    manifest = build_manifest(records, (0.8, 0.1, 0.1), seed=7)

    hyper = text_mod.TextTrainHyper(epochs=3, batch_size=16, learning_rate=1e-3, seed=7)
    model, report = text_mod.fine_tune(tiny_text_cfg, manifest, hyper)
    artifact_dir = work / "text"
    text_mod.save_text_model(model, artifact_dir)
    return {
        "manifest": manifest,
        "model": model,
        "report": report,
        "artifact_dir": artifact_dir,
        "csv_path": csv_path,
    }


@pytest.fixture(scope="session")
def service_config_path(tmp_path_factory, small_audio_setup, small_text_setup):
    """App config JSON wired to the small trained artifacts + mock transcription."""
    work = tmp_path_factory.mktemp("service")
    fixture_path = work / "transcripts.tsv"
    fixture_path.write_text(
        "clip_001\ti want a refund\n"
        "bench_0\tthis is taking forever and i am fuming\n"
        "bench_1\twhat a wonderful surprise today\n"
    )
    config = {
        "paths": {
            "artifact_dir": str(small_audio_setup["artifact_dir"].parent),
            "audio_model_dir": str(small_audio_setup["artifact_dir"]),
            "text_model_dir": str(small_text_setup["artifact_dir"]),
            "cache_dir": str(work / "cache"),
            "report_dir": str(work / "reports"),
        },
        "transcription": {"backend": "mock", "fixture_path": str(fixture_path)},
    }
    path = work / "config.json"
    path.write_text(json.dumps(config))
    return path


def make_audio_records(n_per_class: int, corpus="tess", split=None):
    """Fake (path-less) audio records for split/metric logic tests."""
    from affectfuse.manifest import AudioClipRecord, Corpus
    from affectfuse.taxonomy import EmotionLabel

    records = []
    for label in EmotionLabel:
        for i in range(n_per_class):
            records.append(
                AudioClipRecord(
                    clip_id=f"{corpus}:{label.label}_{i:03d}",
                    source_path=f"/nowhere/{label.label}_{i:03d}.wav",
                    corpus=Corpus(corpus),
                    label=label,
                    speaker_id=f"spk{i % 4}",
                    split=split,
                )
            )
    return records


@pytest.fixture
def balanced_records():
    return make_audio_records(4)


def rng_simplex(rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(8))
