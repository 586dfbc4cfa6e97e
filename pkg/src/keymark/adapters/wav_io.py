import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import soundfile as sf
import torch

from ..entities import AudioClip
from ..entities.exceptions import AudioWriteError, NonFiniteError, WavFormatError
from ..entities.models import PIPELINE_SAMPLE_RATE

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")

PathLike = Union[str, Path]


def read_wav(path: PathLike) -> AudioClip:
    """Read a mono 16 kHz PCM16 or float32 WAV file.

    PCM16 samples are divided by 32768, so -32768 maps to -1.0 exactly.

    Raises:
        WavFormatError: On a malformed header, more than one channel, a
            sample rate other than 16 kHz or an unsupported encoding
    """
    try:
        info = sf.info(str(path))
    except (RuntimeError, sf.LibsndfileError) as e:
        raise WavFormatError(f"{path}: cannot parse WAV header ({e})")
    if info.format != "WAV":
        raise WavFormatError(f"{path}: expected a WAV (RIFF) file, got {info.format}")
    if info.channels != 1:
        raise WavFormatError(f"{path}: expected mono audio, got {info.channels} channels")
    if info.samplerate != PIPELINE_SAMPLE_RATE:
        raise WavFormatError(
            f"{path}: expected {PIPELINE_SAMPLE_RATE} Hz, got {info.samplerate} Hz (resampling is not supported)"
        )
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise WavFormatError(f"{path}: unsupported encoding {info.subtype}, expected PCM_16 or FLOAT")

    try:
        if info.subtype == "PCM_16":
            raw, _ = sf.read(str(path), dtype="int16", always_2d=False)
            samples = raw.astype(np.float32) / np.float32(PCM16_SCALE)
        else:
            samples, _ = sf.read(str(path), dtype="float32", always_2d=False)
    except (RuntimeError, sf.LibsndfileError) as e:
        raise WavFormatError(f"{path}: cannot decode samples ({e})")

    return AudioClip(samples=torch.from_numpy(np.ascontiguousarray(samples, dtype=np.float32)))


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Scale by 32768 and round half away from zero into int16."""
    scaled = samples.astype(np.float64) * PCM16_SCALE
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)


def write_wav(
    clip: AudioClip,
    path: PathLike,
    subtype: str = "PCM_16",
    logger: Optional[logging.Logger] = None,
) -> int:
    """Write ``clip`` as a mono WAV file.

    Samples outside [-1, 1] are clipped first.

    Returns:
        int: Number of clipped samples
    """
    log = logger or logging.getLogger(__name__)
    if subtype not in SUPPORTED_SUBTYPES:
        raise WavFormatError(f"unsupported encoding {subtype}, expected PCM_16 or FLOAT")
    samples = clip.samples.detach().cpu().numpy().astype(np.float32)
    if not np.isfinite(samples).all():
        raise NonFiniteError("refusing to write non-finite samples")

    clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
    if clipped:
        log.warning(f"Clipped {clipped} samples outside [-1, 1] while writing {path}")
        samples = np.clip(samples, -1.0, 1.0)

    data = quantize_pcm16(samples) if subtype == "PCM_16" else samples
    try:
        sf.write(str(path), data, clip.sample_rate, subtype=subtype, format="WAV")
    except (RuntimeError, OSError, sf.LibsndfileError) as e:
        raise AudioWriteError(f"cannot write {path}: {e}")
    return clipped


def wav_subtype(path: PathLike) -> str:
    """Sample encoding of a WAV file as named by libsndfile (``PCM_16``, ``FLOAT``...)."""
    try:
        return sf.info(str(path)).subtype
    except (RuntimeError, sf.LibsndfileError) as e:
        raise WavFormatError(f"{path}: cannot parse WAV header ({e})")
