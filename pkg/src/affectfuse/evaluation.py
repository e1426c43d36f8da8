"""Evaluation harness: accuracy/PRF metrics, confusion matrices, noise
robustness sweeps, latency benchmarks, and report emission.

Definitional identities are exact by construction: overall accuracy IS
trace(confusion)/sum(confusion), and per-class support IS the row sum.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioClip
from .augment import AugmentSpec, augment
from .errors import EmptySlice, SilentClip
from .fusion import decide
from .manifest import AudioClipRecord, DatasetManifest, Record
from .taxonomy import CANONICAL_LABELS, N_CLASSES


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    undefined: tuple[str, ...] = ()


@dataclass
class EvalResult:
    slice_id: str
    overall_accuracy: float
    per_class: dict[str, ClassMetrics]
    confusion: np.ndarray  # 8x8 counts, rows = true, cols = predicted
    n_records: int


@dataclass
class RobustnessCurve:
    points: list[tuple[float, float]]  # (snr_db, accuracy), snr strictly decreasing
    base_eval_id: str
    n_skipped_silent: int = 0


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    max_ms: float


@dataclass
class LatencyReport:
    stages: dict[str, LatencyStats]
    n_samples: int


def _metrics_from_confusion(confusion: np.ndarray, slice_id: str) -> EvalResult:
    total = int(confusion.sum())
    correct = int(np.trace(confusion))
    per_class: dict[str, ClassMetrics] = {}
    for i, name in enumerate(CANONICAL_LABELS):
        tp = int(confusion[i, i])
        support = int(confusion[i].sum())
        predicted = int(confusion[:, i].sum())
        undefined = []
        if predicted > 0:
            precision = tp / predicted
        else:
            precision, undefined = 0.0, undefined + ["precision"]
        if support > 0:
            recall = tp / support
        else:
            recall, undefined = 0.0, undefined + ["recall"]
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1, undefined = 0.0, undefined + ["f1"]
        per_class[name] = ClassMetrics(precision, recall, f1, support, tuple(undefined))
    return EvalResult(
        slice_id=slice_id,
        overall_accuracy=correct / total,
        per_class=per_class,
        confusion=confusion,
        n_records=total,
    )


def evaluate(predict_fn, records: list[Record], slice_id: str = "all") -> EvalResult:
    """Confusion matrix and metrics for predict_fn over a record slice.

    predict_fn(record) must return an EmotionDistribution; predicted labels
    come from :func:`decide`.

    Raises:
        EmptySlice: no records.
    """
    if not records:
        raise EmptySlice(f"slice {slice_id!r} has no records")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for record in records:
        predicted = decide(predict_fn(record))
        confusion[int(record.label), int(predicted)] += 1
    return _metrics_from_confusion(confusion, slice_id)


def per_corpus_breakdown(predict_fn, manifest: DatasetManifest, split: str | None = "test") -> list[EvalResult]:
    """One EvalResult per corpus present, plus a pooled result (slice "pooled").

    Corpora with zero records in the slice are skipped with a warning.
    """
    records = manifest.audio_records(split)
    if not records:
        raise EmptySlice(f"manifest has no audio records in split {split!r}")
    corpora_present = sorted({r.corpus.value for r in manifest.audio_records(None)})

    results = []
    for corpus in corpora_present:
        group = [r for r in records if r.corpus.value == corpus]
        if not group:
            warnings.warn(f"corpus {corpus!r} has no records in split {split!r}; skipped")
            continue
        results.append(evaluate(predict_fn, group, slice_id=corpus))
    results.append(evaluate(predict_fn, records, slice_id="pooled"))
    return results


def _clip_seed(base_seed: int, clip_id: str, snr_db: float) -> int:
    return zlib.crc32(f"{base_seed}:{clip_id}:{snr_db}".encode()) & 0x7FFFFFFF


def noise_sweep(
    predict_fn,
    records: list[AudioClipRecord],
    snr_list_db: list[float],
    seed: int,
    load_clip,
    base_eval_id: str = "all",
) -> RobustnessCurve:
    """Accuracy under seeded additive noise at each SNR, clean point included.

    predict_fn(clip) -> EmotionDistribution; load_clip(record) -> AudioClip.
    The clean condition is stored as snr = +inf; points are ordered by
    strictly decreasing SNR. Silent clips are skipped and counted.

    Raises:
        EmptySlice: no records.
    """
    if not records:
        raise EmptySlice("noise sweep needs a non-empty record slice")
    snrs = sorted(set(float(s) for s in snr_list_db), reverse=True)
    clips = [(record, load_clip(record)) for record in records]

    points: list[tuple[float, float]] = []
    n_skipped = 0
    for snr in [math.inf] + snrs:
        correct = 0
        total = 0
        for record, clip in clips:
            if math.isinf(snr):
                noisy = clip
            else:
                spec = AugmentSpec("additive_noise", snr, seed=_clip_seed(seed, record.clip_id, snr))
                try:
                    noisy = augment(clip, spec)
                except SilentClip:
                    n_skipped += 1
                    continue
            total += 1
            if decide(predict_fn(noisy)) == record.label:
                correct += 1
        points.append((snr, correct / total if total else 0.0))
    return RobustnessCurve(points=points, base_eval_id=base_eval_id, n_skipped_silent=n_skipped)


def latency_benchmark(pipeline, clips: list[AudioClip], n_warmup: int, n_measure: int) -> LatencyReport:
    """Wall-clock stats per pipeline stage and end-to-end, warmup excluded.

    Clips are cycled; clip ids "bench_<i>" are passed through so mock
    transcription fixtures can key on them.
    """
    if n_measure < 10:
        raise ValueError(f"n_measure must be >= 10, got {n_measure}")
    if not clips:
        raise ValueError("need at least one clip")

    samples: dict[str, list[float]] = {}
    for i in range(n_warmup + n_measure):
        clip = clips[i % len(clips)]
        result = pipeline.predict_clip(clip, clip_id=f"bench_{i % len(clips)}")
        if i < n_warmup:
            continue
        for stage, ms in result.timings_ms.items():
            samples.setdefault(stage, []).append(ms)

    stages = {}
    for stage, values in samples.items():
        arr = np.asarray(values)
        stages[stage] = LatencyStats(
            mean_ms=float(arr.mean()),
            p50_ms=float(np.percentile(arr, 50)),
            p95_ms=float(np.percentile(arr, 95)),
            max_ms=float(arr.max()),
        )
    return LatencyReport(stages=stages, n_samples=n_measure)


# --- report emission ---------------------------------------------------------

def _slug(slice_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", slice_id.strip().lower()) or "all"


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def emit_report(
    results: list[EvalResult],
    out_dir: str | Path,
    curves: list[RobustnessCurve] | None = None,
    latency: LatencyReport | None = None,
) -> list[Path]:
    """Write metrics.csv, per-slice confusion CSV/PNG, robustness PNGs,
    latency.csv, and summary.md into out_dir; returns the written paths.

    Tables are byte-deterministic for identical inputs (images are not).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = curves or []
    written: list[Path] = []

    if results:
        metrics_path = out_dir / "metrics.csv"
        with open(metrics_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["slice_id", "class", "precision", "recall", "f1", "support",
                 "overall_accuracy", "n_records", "undefined"]
            )
            for res in results:
                for name in CANONICAL_LABELS:
                    cm = res.per_class[name]
                    writer.writerow(
                        [res.slice_id, name, _fmt(cm.precision), _fmt(cm.recall),
                         _fmt(cm.f1), cm.support, _fmt(res.overall_accuracy),
                         res.n_records, "|".join(cm.undefined)]
                    )
        written.append(metrics_path)

        for res in results:
            slug = _slug(res.slice_id)
            conf_path = out_dir / f"confusion_{slug}.csv"
            with open(conf_path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["true\\pred"] + list(CANONICAL_LABELS))
                for i, name in enumerate(CANONICAL_LABELS):
                    writer.writerow([name] + [int(v) for v in res.confusion[i]])
            written.append(conf_path)
            written.append(_plot_confusion(res, out_dir / f"confusion_{slug}.png"))

    for curve in curves:
        written.append(_plot_curve(curve, out_dir / f"robustness_{_slug(curve.base_eval_id)}.png"))

    if latency is not None:
        latency_path = out_dir / "latency.csv"
        with open(latency_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["stage", "mean_ms", "p50_ms", "p95_ms", "max_ms", "n_samples"])
            for stage in sorted(latency.stages):
                st = latency.stages[stage]
                writer.writerow(
                    [stage, _fmt(st.mean_ms), _fmt(st.p50_ms), _fmt(st.p95_ms),
                     _fmt(st.max_ms), latency.n_samples]
                )
        written.append(latency_path)

    summary_path = out_dir / "summary.md"
    with open(summary_path, "w") as fh:
        fh.write("# Evaluation summary\n\n")
        if results:
            fh.write("## Accuracy by slice\n\n")
            fh.write("| slice | records | accuracy |\n|---|---|---|\n")
            for res in results:
                fh.write(f"| {res.slice_id} | {res.n_records} | {_fmt(res.overall_accuracy)} |\n")
            fh.write("\n")
        for curve in curves:
            fh.write(f"## Noise robustness ({curve.base_eval_id})\n\n")
            fh.write("| snr_db | accuracy |\n|---|---|\n")
            for snr, acc in curve.points:
                label = "clean" if math.isinf(snr) else _fmt(snr)
                fh.write(f"| {label} | {_fmt(acc)} |\n")
            if curve.n_skipped_silent:
                fh.write(f"\nSkipped {curve.n_skipped_silent} silent clip(s).\n")
            fh.write("\n")
        if latency is not None:
            fh.write("## Latency (ms)\n\n")
            fh.write("| stage | mean | p50 | p95 | max |\n|---|---|---|---|---|\n")
            for stage in sorted(latency.stages):
                st = latency.stages[stage]
                fh.write(
                    f"| {stage} | {_fmt(st.mean_ms)} | {_fmt(st.p50_ms)} "
                    f"| {_fmt(st.p95_ms)} | {_fmt(st.max_ms)} |\n"
                )
            fh.write("\n")
        if not results and not curves and latency is None:
            fh.write("No results.\n")
    written.append(summary_path)
    return written


def _plot_confusion(res: EvalResult, path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(res.confusion, cmap="Blues")
    ax.set_xticks(range(N_CLASSES), CANONICAL_LABELS, rotation=45, ha="right")
    ax.set_yticks(range(N_CLASSES), CANONICAL_LABELS)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"{res.slice_id}: accuracy {res.overall_accuracy:.3f}")
    for i in range(N_CLASSES):
        for j in range(N_CLASSES):
            if res.confusion[i, j]:
                ax.text(j, i, int(res.confusion[i, j]), ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _plot_curve(curve: RobustnessCurve, path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    finite = [(s, a) for s, a in curve.points if not math.isinf(s)]
    clean = [a for s, a in curve.points if math.isinf(s)]
    fig, ax = plt.subplots(figsize=(6, 4))
    if finite:
        xs, ys = zip(*finite)
        ax.plot(xs, ys, marker="o", label="noisy")
        ax.invert_xaxis()
    if clean:
        ax.axhline(clean[0], linestyle="--", color="gray", label="clean")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"noise robustness: {curve.base_eval_id}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
