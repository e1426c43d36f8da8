"""Exception hierarchy shared by all affectfuse modules.

Every domain failure raises a subclass of :class:`AffectFuseError`; the CLI
maps these to exit code 1, the service maps them to HTTP statuses.
"""

from __future__ import annotations


class AffectFuseError(Exception):
    """Base class for all domain errors raised by this package."""


# --- taxonomy / ingest ------------------------------------------------------

class MalformedFilename(AffectFuseError):
    """Corpus file name does not match the corpus naming convention."""


class UnmappableLabel(AffectFuseError):
    """A raw label token has no mapping into the canonical taxonomy."""


class MissingColumn(AffectFuseError):
    """Delimited text dataset lacks a required column."""


class EmptyDataset(AffectFuseError):
    """A dataset load produced zero usable records."""


class CorruptManifest(AffectFuseError):
    """Manifest file cannot be parsed or carries an unknown schema version."""


class DegenerateClassWarning(UserWarning):
    """A class has fewer records than the number of requested splits."""


# --- audio features ---------------------------------------------------------

class UnsupportedEncoding(AffectFuseError):
    """WAV file uses a sample encoding the decoder does not handle."""


class CorruptFile(AffectFuseError):
    """Audio file is truncated or structurally invalid."""


class ClipTooShort(AffectFuseError):
    """Clip has fewer samples than one analysis frame."""


class InvalidBand(AffectFuseError):
    """Mel filterbank band edges are unusable (fmin >= fmax or empty filter)."""


class EmptyMatrix(AffectFuseError):
    """Feature matrix has no frames to aggregate."""


class SilentClip(AffectFuseError):
    """Zero-power signal: SNR-scaled noise is undefined; caller should skip."""


# --- models -----------------------------------------------------------------

class ShapeError(AffectFuseError):
    """Model configuration produces an impossible tensor shape."""


class ShapeMismatch(AffectFuseError):
    """Input feature shape does not match the model configuration."""


class EmptySplit(AffectFuseError):
    """Manifest lacks records for a required split."""


class NonFiniteLoss(AffectFuseError):
    """Training loss became NaN or infinite; aborted with diagnostic."""


class ArtifactMismatch(AffectFuseError):
    """Stored artifact metadata conflicts with the incoming data or taxonomy."""


class CorruptArtifact(AffectFuseError):
    """Model artifact directory is missing files or unreadable."""


class RegistryUnavailable(AffectFuseError):
    """Pretrained weights could not be resolved; safe to retry."""

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class EmptyText(AffectFuseError):
    """Text is empty after normalization; nothing to classify."""


# --- transcription ----------------------------------------------------------

class BackendTimeout(AffectFuseError):
    """Transcription backend exceeded the configured time budget."""


class BackendUnavailable(AffectFuseError):
    """Transcription backend cannot be reached."""


class AudioTooLong(AffectFuseError):
    """Clip exceeds the backend's maximum supported duration."""


class UnknownBackend(AffectFuseError):
    """Configuration names a transcription backend that is not registered."""


# --- fusion -----------------------------------------------------------------

class NoModalities(AffectFuseError):
    """Fusion was called with no input distributions."""


class InvalidDistribution(AffectFuseError):
    """Probability vector has a negative entry or does not sum to one."""


# --- evaluation -------------------------------------------------------------

class EmptySlice(AffectFuseError):
    """Evaluation slice contains no records."""


# --- configuration ----------------------------------------------------------

class ConfigInvalid(AffectFuseError):
    """Configuration failed validation; message lists every offending key."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {p}" for p in self.problems))
