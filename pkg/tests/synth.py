"""Synthetic data generators for tests.

The sandbox has no speech corpora, tweet datasets, or hub access, so tests
build stand-ins: a TESS-layout audio corpus whose classes differ by harmonic
structure, AM rate, chirp, and noise floor; a tweet CSV with per-emotion
lexicons; and a tiny transformer encoder saved into a local registry.
"""

import csv
import math
from pathlib import Path

import numpy as np

from affectfuse.audio_io import AudioClip, save_wav

SAMPLE_RATE = 22050

# Per-emotion acoustic signature: fundamental Hz, harmonic count/decay,
# AM rate/depth, linear chirp fraction, noise SNR dB.
EMOTION_VOICES = {
    "angry":    dict(f0=210.0, nh=12, decay=0.92, am=7.0, depth=0.60, chirp=0.00, snr=14.0),
    "calm":     dict(f0=165.0, nh=5,  decay=0.80, am=0.8, depth=0.10, chirp=0.05, snr=32.0),
    "disgust":  dict(f0=130.0, nh=6,  decay=0.70, am=2.5, depth=0.40, chirp=-0.10, snr=20.0),
    "fear":     dict(f0=340.0, nh=8,  decay=0.82, am=11.0, depth=0.50, chirp=0.08, snr=18.0),
    "happy":    dict(f0=270.0, nh=10, decay=0.86, am=4.5, depth=0.30, chirp=0.25, snr=24.0),
    "neutral":  dict(f0=175.0, nh=5,  decay=0.75, am=1.5, depth=0.15, chirp=0.00, snr=30.0),
    "sad":      dict(f0=145.0, nh=4,  decay=0.60, am=1.0, depth=0.25, chirp=-0.30, snr=28.0),
    "surprise": dict(f0=330.0, nh=9,  decay=0.88, am=5.5, depth=0.35, chirp=0.50, snr=21.0),
}

TESS_WORDS = [
    "back", "bar", "base", "bath", "bean", "beg", "bite", "boat", "bone", "book",
    "bought", "burn", "cab", "calm", "came", "cause", "chain", "chair", "chalk",
    "chat", "check", "cheek", "chief", "choice", "chose", "cool", "dab", "date",
    "dead", "deep", "dime", "dip", "ditch", "dodge", "dog", "doll", "door", "fall",
    "fat", "film",
]


def emotion_clip(emotion: str, rng: np.random.Generator, seconds: float | None = None,
                 speaker_factor: float = 1.0, sample_rate: int = SAMPLE_RATE) -> AudioClip:
    """One synthetic utterance with the emotion's spectral signature."""
    voice = EMOTION_VOICES[emotion]
    if seconds is None:
        seconds = rng.uniform(2.3, 3.1)
    n = round(seconds * sample_rate)
    t = np.arange(n) / sample_rate

    f0 = voice["f0"] * speaker_factor * rng.uniform(0.93, 1.07)
    amp = rng.uniform(0.25, 0.55)
    chirp = voice["chirp"]
    phase_base = 2.0 * np.pi * f0 * (t + chirp * t**2 / (2.0 * seconds))

    signal = np.zeros(n)
    for h in range(voice["nh"]):
        signal += voice["decay"] ** h * np.sin((h + 1) * phase_base + rng.uniform(0, 2 * np.pi))
    signal *= amp / np.max(np.abs(signal))

    am = 1.0 - voice["depth"] / 2.0 + (voice["depth"] / 2.0) * np.sin(
        2.0 * np.pi * voice["am"] * t + rng.uniform(0, 2 * np.pi)
    )
    signal *= am

    noise = rng.standard_normal(n)
    noise *= math.sqrt(np.mean(signal**2) / (10 ** (voice["snr"] / 10.0)) / np.mean(noise**2))
    return AudioClip(signal + noise, sample_rate)


TESS_EMOTION_DIRS = {
    "angry": "angry", "disgust": "disgust", "fear": "fear", "happy": "happy",
    "neutral": "neutral", "surprise": "Pleasant_surprise", "sad": "sad",
}
TESS_EMOTION_TOKENS = {
    "angry": "angry", "disgust": "disgust", "fear": "fear", "happy": "happy",
    "neutral": "neutral", "surprise": "ps", "sad": "sad",
}


def make_tess_corpus(root: Path, per_class: int = 58, seed: int = 0) -> int:
    """Write a TESS-layout corpus (7 emotions, speakers OAF/YAF); returns file count."""
    rng = np.random.default_rng(seed)
    n_files = 0
    for emotion, dirname in TESS_EMOTION_DIRS.items():
        token = TESS_EMOTION_TOKENS[emotion]
        for i in range(per_class):
            speaker = "OAF" if i % 2 == 0 else "YAF"
            factor = 0.85 if speaker == "OAF" else 1.15
            word = TESS_WORDS[(i // 2) % len(TESS_WORDS)]
            folder = root / f"{speaker}_{dirname}"
            folder.mkdir(parents=True, exist_ok=True)
            clip = emotion_clip(emotion, rng, speaker_factor=factor)
            save_wav(folder / f"{speaker}_{word}_{token}.wav", clip)
            n_files += 1
    return n_files


TWEET_LEXICON = {
    "angry": ["furious", "so angry", "full of rage", "pissed off", "fuming", "outraged",
              "irritated beyond belief", "seething"],
    "calm": ["feeling calm", "peaceful", "relaxed", "serene", "at ease", "tranquil",
             "chilled out", "perfectly settled"],
    "disgust": ["disgusting", "gross", "revolting", "nasty", "vile", "sickening",
                "repulsive", "makes me gag"],
    "fear": ["terrified", "scared stiff", "frightened", "anxious", "in a panic",
             "full of dread", "afraid", "worried sick"],
    "happy": ["so happy", "delighted", "thrilled", "joyful", "having a wonderful day",
              "grinning ear to ear", "ecstatic", "feeling blessed"],
    "neutral": ["just posted the report", "heading to work", "the meeting is at noon",
                "quick update", "for the record", "schedule unchanged", "noted",
                "nothing new today"],
    "sad": ["heartbroken", "so sad", "crying again", "miserable", "feeling down",
            "full of grief", "lost and alone", "in tears"],
    "surprise": ["cannot believe this", "what a shock", "totally unexpected", "no way",
                 "stunned", "did not see that coming", "astonished", "out of nowhere"],
}

# Raw label spellings per class, to exercise synonym folding at ingest.
TWEET_RAW_LABELS = {
    "angry": ["angry", "anger"],
    "calm": ["calm"],
    "disgust": ["disgust", "disgusted"],
    "fear": ["fear", "fearful"],
    "happy": ["happy", "happiness", "joy"],
    "neutral": ["neutral"],
    "sad": ["sad", "sadness"],
    "surprise": ["surprise", "surprised"],
}

_FILLERS = ["i am", "honestly", "today i feel", "this is", "feeling", "right now i am", "tbh"]
_TAILS = ["", " #mood", " #life", " lol", " ...", " !!"]


def make_tweet_rows(n: int, seed: int = 0) -> list[tuple[str, str]]:
    """n (text, raw_label) pairs with mentions/URLs/hashtags mixed in."""
    rng = np.random.default_rng(seed)
    emotions = list(TWEET_LEXICON)
    weights = np.array([1.3, 0.9, 1.0, 1.0, 1.4, 1.1, 1.2, 0.9])
    weights = weights / weights.sum()
    rows = []
    for _ in range(n):
        emotion = emotions[rng.choice(len(emotions), p=weights)]
        phrase = TWEET_LEXICON[emotion][rng.integers(len(TWEET_LEXICON[emotion]))]
        parts = []
        if rng.random() < 0.25:
            parts.append(f"@friend{rng.integers(100)}")
        parts.append(_FILLERS[rng.integers(len(_FILLERS))])
        parts.append(phrase)
        if rng.random() < 0.3:
            parts.append(TWEET_LEXICON[emotion][rng.integers(len(TWEET_LEXICON[emotion]))])
        if rng.random() < 0.15:
            parts.append(f"https://t.co/{rng.integers(10_000)}")
        text = " ".join(parts) + _TAILS[rng.integers(len(_TAILS))]
        raw = TWEET_RAW_LABELS[emotion][rng.integers(len(TWEET_RAW_LABELS[emotion]))]
        rows.append((text, raw))
    return rows


def make_tweet_csv(path: Path, n: int = 2500, seed: int = 0,
                   content_col: str = "tweet_text", label_col: str = "sentiment") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([content_col, label_col])
        writer.writerows(make_tweet_rows(n, seed))


def build_tiny_registry(registry_dir: Path, corpus_texts: list[str],
                        pretrained_id: str = "distilbert-tiny-test", seed: int = 0) -> Path:
    """Save a tiny random-init DistilBERT-architecture encoder + tokenizer
    into registry_dir/pretrained_id so offline resolution has something to find."""
    import torch
    from tokenizers import Tokenizer, models, pre_tokenizers, processors
    from transformers import DistilBertConfig, DistilBertModel, PreTrainedTokenizerFast

    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "[MASK]": 4}
    for text in corpus_texts:
        for token in text.lower().split():
            token = token.strip(".,!?#")
            if token and token not in vocab:
                vocab[token] = len(vocab)
    tok = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tok.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", 2), ("[SEP]", 3)],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="[PAD]", unk_token="[UNK]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
    )
    config = DistilBertConfig(
        vocab_size=len(vocab), dim=128, n_layers=2, n_heads=4, hidden_dim=256,
        max_position_embeddings=128,
    )
    torch.manual_seed(seed)
    encoder = DistilBertModel(config)
    target = registry_dir / pretrained_id
    target.mkdir(parents=True, exist_ok=True)
    encoder.save_pretrained(target)
    tokenizer.save_pretrained(target)
    return target
