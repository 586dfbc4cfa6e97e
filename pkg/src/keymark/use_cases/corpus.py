import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
import torch
from scipy import signal

from ..entities import AudioClip, CorpusSpec
from ..entities.exceptions import ConfigurationError, CorpusReadError, KeymarkException

ClipReader = Callable[[Path], AudioClip]


class CorpusUseCase:
    """Use case for assembling training and evaluation audio.

    The synthetic corpus mixes three families of 1-s clips: harmonic
    multi-tone clips, band-filtered noise and amplitude-modulated carriers.
    WAV directories are read through an injected reader and cut into
    segment-length clips.
    """

    def __init__(self, reader: Optional[ClipReader] = None, logger: Optional[logging.Logger] = None):
        self.reader = reader
        self.logger = logger or logging.getLogger(self.__class__.__name__)

    @staticmethod
    def _rng(generator: torch.Generator) -> np.random.Generator:
        return np.random.default_rng(int(torch.randint(0, 2**31 - 1, (1,), generator=generator).item()))

    @staticmethod
    def _normalize(x: np.ndarray, peak: float) -> np.ndarray:
        top = np.max(np.abs(x))
        if top == 0:
            return x
        return x * (peak / top)

    def _tone(self, rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
        f0 = rng.uniform(80.0, 1000.0)
        x = np.zeros_like(t)
        for k in range(1, int(rng.integers(2, 9)) + 1):
            if k * f0 >= 7800.0:
                break
            x += rng.uniform(0.3, 1.0) / k * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
        return x

    def _noise(self, rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
        low = rng.uniform(50.0, 2000.0)
        high = min(low * rng.uniform(1.5, 8.0), 0.45 * sample_rate)
        sos = signal.butter(4, [low, high], btype="bandpass", fs=sample_rate, output="sos")
        return signal.sosfilt(sos, rng.standard_normal(n))

    def _am(self, rng: np.random.Generator, t: np.ndarray, sample_rate: int) -> np.ndarray:
        carrier = self._tone(rng, t) if rng.random() < 0.5 else self._noise(rng, t.size, sample_rate)
        depth = rng.uniform(0.3, 1.0)
        rate = rng.uniform(2.0, 20.0)
        return carrier * (1.0 + depth * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))) / (1.0 + depth)

    def toy_corpus(self, spec: CorpusSpec, generator: torch.Generator) -> List[AudioClip]:
        """Synthetic clips; every peak lies in [0.25, 1] * ``spec.max_amplitude``."""
        rng = self._rng(generator)
        t = np.arange(spec.clip_len) / spec.sample_rate
        families = [("tone", spec.n_tones), ("noise", spec.n_noise), ("am", spec.n_am)]
        clips = []
        for family, count in families:
            for _ in range(count):
                if family == "tone":
                    x = self._tone(rng, t)
                elif family == "noise":
                    x = self._noise(rng, spec.clip_len, spec.sample_rate)
                else:
                    x = self._am(rng, t, spec.sample_rate)
                x = self._normalize(x, spec.max_amplitude * rng.uniform(0.25, 1.0))
                clips.append(AudioClip(samples=torch.from_numpy(x.astype(np.float32))))
        self.logger.debug(f"Generated {len(clips)} synthetic clips ({spec.n_tones}/{spec.n_noise}/{spec.n_am})")
        return clips

    def chop(self, clip: AudioClip, clip_len: int) -> List[AudioClip]:
        """Non-overlapping ``clip_len`` pieces; a tail of at least half a piece is zero-padded."""
        samples = clip.samples
        pieces = [samples[s : s + clip_len] for s in range(0, samples.numel() - clip_len + 1, clip_len)]
        tail = samples[len(pieces) * clip_len :]
        if tail.numel() >= (clip_len + 1) // 2:
            pieces.append(torch.nn.functional.pad(tail, (0, clip_len - tail.numel())))
        return [AudioClip(samples=p.clone()) for p in pieces]

    def load_directory(self, directory: str, clip_len: int) -> List[AudioClip]:
        """Read every ``*.wav`` under ``directory`` in sorted order.

        Raises:
            CorpusReadError: Listing every file that could not be read
        """
        if self.reader is None:
            raise ConfigurationError("a WAV directory was configured but no reader is available")
        root = Path(directory)
        if not root.is_dir():
            raise CorpusReadError([directory], "not a directory")
        clips: List[AudioClip] = []
        failed: List[str] = []
        for path in sorted(root.rglob("*.wav")):
            try:
                clips.extend(self.chop(self.reader(path), clip_len))
            except (KeymarkException, OSError, ValueError) as e:
                self.logger.warning(f"Could not read corpus file {path}: {str(e)}")
                failed.append(str(path))
        if failed:
            raise CorpusReadError(failed)
        self.logger.info(f"Read {len(clips)} clips from {root}")
        return clips

    def build(self, spec: CorpusSpec, generator: torch.Generator) -> List[AudioClip]:
        """Synthetic clips followed by the clips of ``spec.wav_dir`` if set."""
        clips = self.toy_corpus(spec, generator)
        if spec.wav_dir:
            clips.extend(self.load_directory(spec.wav_dir, spec.clip_len))
        return clips

    @staticmethod
    def split(clips: List[AudioClip], holdout: int) -> Tuple[List[AudioClip], List[AudioClip]]:
        """(training, held-out) with held-out clips drawn evenly across the list."""
        if holdout <= 0 or len(clips) < 2:
            return list(clips), []
        holdout = min(holdout, len(clips) - 1)
        held_idx = set(np.linspace(0, len(clips) - 1, holdout).round().astype(int).tolist())
        train = [c for i, c in enumerate(clips) if i not in held_idx]
        held = [c for i, c in enumerate(clips) if i in held_idx]
        return train, held
