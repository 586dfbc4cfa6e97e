from typing import List, Optional

VALIDATION_EXIT_CODE = 2
RUNTIME_EXIT_CODE = 1


class KeymarkException(Exception):
    """Base exception for watermarking errors.

    ``exit_code`` is what the command-line surface returns when the
    exception reaches it: 2 for validation errors, 1 for runtime errors.
    """

    def __init__(self, message: str, exit_code: int = RUNTIME_EXIT_CODE):
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message)


class ValidationException(KeymarkException):
    """Input or configuration rejected before any work was done."""

    def __init__(self, message: str):
        super().__init__(message=message, exit_code=VALIDATION_EXIT_CODE)


class ShapeMismatchError(ValidationException):
    """Tensor shapes incompatible with an operation."""

    def __init__(self, op: str, *shapes: object):
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) if not isinstance(s, str) else s for s in shapes)
        super().__init__(f"{op}: shape mismatch {rendered}")


class KeyLengthError(ValidationException):
    """Key length does not match the number of invertible blocks."""


class PayloadLengthError(ValidationException):
    """Watermark length does not match the codec."""


class DuplicateKeyError(ValidationException):
    """Two entries of a watermark stack share a key."""


class KeySpaceExhaustedError(ValidationException):
    """Every key of the key space is excluded."""


class EmptyMenuError(ValidationException):
    """An attack menu without entries."""


class WavFormatError(ValidationException):
    """WAV file that violates the mono / 16 kHz / PCM16-or-float32 contract."""


class ConfigurationError(ValidationException):
    """Configuration that cannot produce a valid computation."""


class CheckpointFormatError(ValidationException):
    """Checkpoint with a bad magic, unsupported version or truncated record."""


class SilentReferenceError(ValidationException):
    """SNR requested against an all-zero reference."""


class NonScalarOutputError(ValidationException):
    """Gradient check on a function that does not return a scalar."""


class ClipTooShortError(ValidationException):
    """Clip shorter than half a segment, nothing to embed or decode."""


class NonFiniteError(KeymarkException):
    """NaN or Inf where only finite values are allowed."""


class TrainingDivergedError(KeymarkException):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(message=f"step {step}: {message}")


class CorpusReadError(KeymarkException):
    """Corpus files that could not be read."""

    def __init__(self, files: List[str], detail: Optional[str] = None):
        self.files = files
        listing = ", ".join(files)
        message = f"failed to read corpus files: {listing}"
        if detail:
            message += f" ({detail})"
        super().__init__(message=message)


class CheckpointIOError(KeymarkException):
    """Checkpoint could not be written or read from storage."""


class AudioWriteError(KeymarkException):
    """Audio file could not be written."""
