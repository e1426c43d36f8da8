"""Filename-convention parsers for the supported speech emotion corpora.

Each parser maps one audio file path to an :class:`AudioClipRecord` with a
canonical label and, where the convention encodes it, a speaker id. Label
code tables follow the corpora's published naming documentation.
"""

from __future__ import annotations

import re
from pathlib import Path

from .errors import MalformedFilename, UnmappableLabel
from .manifest import AudioClipRecord, Corpus
from .taxonomy import EmotionLabel, normalize_label

# RAVDESS: 7 two-digit fields, e.g. 03-01-05-01-02-01-12.wav
# (modality-vocal-emotion-intensity-statement-repetition-actor)
_RAVDESS_EMOTION = {
    "01": "neutral",
    "02": "calm",
    "03": "happy",
    "04": "sad",
    "05": "angry",
    "06": "fearful",
    "07": "disgust",
    "08": "surprised",
}

# CREMA-D: ActorID_Sentence_Emotion_Intensity, e.g. 1001_DFA_ANG_XX.wav
_CREMA_EMOTION = {
    "ANG": "angry",
    "DIS": "disgust",
    "FEA": "fear",
    "HAP": "happy",
    "NEU": "neutral",
    "SAD": "sad",
}

# SAVEE: <speaker>_<code><nn>.wav, e.g. DC_sa01.wav; speakers DC, JE, JK, KL
_SAVEE_EMOTION = {
    "a": "angry",
    "d": "disgust",
    "f": "fear",
    "h": "happy",
    "n": "neutral",
    "sa": "sad",
    "su": "surprise",
}
_SAVEE_FLAT = re.compile(r"^([A-Z]{2})_([a-z]{1,2})(\d{2})$")
_SAVEE_BARE = re.compile(r"^([a-z]{1,2})(\d{2})$")

# Berlin EMO-DB: <speaker><text><emotion letter><version>, e.g. 03a01Fa.wav.
# Letter codes are German initials; L (Langeweile/boredom) has no canonical
# class and is rejected as unmappable.
_EMODB_EMOTION = {
    "W": "angry",
    "E": "disgust",
    "A": "fear",
    "F": "happy",
    "N": "neutral",
    "T": "sad",
}
_EMODB_STEM = re.compile(r"^(\d{2})([a-z]\d{2})([A-Z])([a-z0-9]?)$")


def _clip_id(corpus: Corpus, stem: str) -> str:
    return f"{corpus.value}:{stem}"


def _parse_ravdess(path: Path) -> AudioClipRecord:
    parts = path.stem.split("-")
    if len(parts) != 7 or not all(p.isdigit() for p in parts):
        raise MalformedFilename(f"not a RAVDESS 7-field filename: {path.name}")
    code = parts[2]
    raw = _RAVDESS_EMOTION.get(code)
    if raw is None:
        raise UnmappableLabel(f"unknown RAVDESS emotion code {code!r} in {path.name}")
    return AudioClipRecord(
        clip_id=_clip_id(Corpus.RAVDESS, path.stem),
        source_path=str(path),
        corpus=Corpus.RAVDESS,
        label=normalize_label(raw, "ravdess"),
        speaker_id=parts[6],
    )


def _parse_tess(path: Path) -> AudioClipRecord:
    parts = path.stem.split("_")
    if len(parts) < 3:
        raise MalformedFilename(f"not a TESS <speaker>_<word>_<emotion> filename: {path.name}")
    speaker = parts[0]
    # Surprise appears both as the short token "ps" and as the spelled-out
    # folder form; try the last token, then the last two joined.
    for token in (parts[-1], "_".join(parts[-2:])):
        try:
            label = normalize_label(token, "tess")
            break
        except UnmappableLabel:
            label = None
    if label is None:
        raise UnmappableLabel(f"unknown TESS emotion token {parts[-1]!r} in {path.name}")
    return AudioClipRecord(
        clip_id=_clip_id(Corpus.TESS, path.stem),
        source_path=str(path),
        corpus=Corpus.TESS,
        label=label,
        speaker_id=speaker,
    )


def _parse_savee(path: Path) -> AudioClipRecord:
    stem = path.stem
    match = _SAVEE_FLAT.match(stem)
    if match:
        speaker, code = match.group(1), match.group(2)
    else:
        bare = _SAVEE_BARE.match(stem)
        parent = path.parent.name
        if bare and re.fullmatch(r"[A-Z]{2}", parent):
            speaker, code = parent, bare.group(1)
        else:
            raise MalformedFilename(f"not a SAVEE <speaker>_<code><nn> filename: {path.name}")
    raw = _SAVEE_EMOTION.get(code)
    if raw is None:
        raise UnmappableLabel(f"unknown SAVEE emotion code {code!r} in {path.name}")
    return AudioClipRecord(
        clip_id=_clip_id(Corpus.SAVEE, f"{speaker}_{stem}" if "_" not in stem else stem),
        source_path=str(path),
        corpus=Corpus.SAVEE,
        label=normalize_label(raw, "savee"),
        speaker_id=speaker,
    )


def _parse_crema_d(path: Path) -> AudioClipRecord:
    parts = path.stem.split("_")
    if len(parts) != 4 or not (parts[0].isdigit() and len(parts[0]) == 4):
        raise MalformedFilename(f"not a CREMA-D 4-field filename: {path.name}")
    raw = _CREMA_EMOTION.get(parts[2])
    if raw is None:
        raise UnmappableLabel(f"unknown CREMA-D emotion code {parts[2]!r} in {path.name}")
    return AudioClipRecord(
        clip_id=_clip_id(Corpus.CREMA_D, path.stem),
        source_path=str(path),
        corpus=Corpus.CREMA_D,
        label=normalize_label(raw, "crema_d"),
        speaker_id=parts[0],
    )


def _parse_emo_db(path: Path) -> AudioClipRecord:
    match = _EMODB_STEM.match(path.stem)
    if not match:
        raise MalformedFilename(f"not an EMO-DB <sp><text><emo><ver> filename: {path.name}")
    letter = match.group(3)
    raw = _EMODB_EMOTION.get(letter)
    if raw is None:
        raise UnmappableLabel(f"EMO-DB emotion letter {letter!r} has no canonical class ({path.name})")
    return AudioClipRecord(
        clip_id=_clip_id(Corpus.EMO_DB, path.stem),
        source_path=str(path),
        corpus=Corpus.EMO_DB,
        label=normalize_label(raw, "emo_db"),
        speaker_id=match.group(1),
    )


_PARSERS = {
    Corpus.RAVDESS: _parse_ravdess,
    Corpus.TESS: _parse_tess,
    Corpus.SAVEE: _parse_savee,
    Corpus.CREMA_D: _parse_crema_d,
    Corpus.EMO_DB: _parse_emo_db,
}


def parse_corpus_entry(corpus: Corpus | str, path: str | Path) -> AudioClipRecord:
    """Parse one corpus file path into a labeled audio record.

    Raises:
        MalformedFilename: name does not match the corpus convention.
        UnmappableLabel: the encoded label has no canonical mapping.
    """
    corpus = Corpus(corpus)
    parser = _PARSERS.get(corpus)
    if parser is None:
        raise MalformedFilename(f"corpus {corpus.value!r} has no filename convention")
    return parser(Path(path))


def scan_corpus(corpus: Corpus | str, root: str | Path, pattern: str = "*.wav"):
    """Yield (record | None, path, error | None) for every matching file under root.

    Unparseable files are reported, not raised, so callers can count skips.
    Files are visited in sorted order for reproducibility.
    """
    root = Path(root)
    for path in sorted(root.rglob(pattern)):
        try:
            yield parse_corpus_entry(corpus, path), path, None
        except (MalformedFilename, UnmappableLabel) as exc:
            yield None, path, exc
