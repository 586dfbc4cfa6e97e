import logging
from typing import List, Optional, Tuple

import numpy as np
import torch

from ..core.dsp import magnitude, stft
from ..core.model import WatermarkModel
from ..entities import (
    AudioClip,
    DecodeResult,
    KeyBits,
    RedundancySource,
    WatermarkBits,
    WatermarkStack,
)
from ..entities.exceptions import ClipTooShortError, KeyLengthError, KeymarkException, PayloadLengthError

Segment = Tuple[int, int]


class WatermarkingUseCase:
    """Use case for embedding and decoding keyed watermarks in audio clips.

    Clips are processed in non-overlapping segments of ``clip_len`` samples.
    A trailing partial segment of at least half a segment is zero-padded for
    processing and truncated afterwards; a shorter tail is left unmarked.
    Multi-segment decodes majority-vote every bit, ties decoding to 0.
    """

    def __init__(self, model: WatermarkModel, logger: Optional[logging.Logger] = None):
        self.model = model
        self.logger = logger or logging.getLogger(self.__class__.__name__)

    @property
    def clip_len(self) -> int:
        return self.model.cfg.clip_len

    def segments(self, length: int) -> List[Segment]:
        """(start, stop) spans of the segments that carry a watermark.

        Raises:
            ClipTooShortError: If the clip is shorter than half a segment
        """
        half = (self.clip_len + 1) // 2
        if length < half:
            raise ClipTooShortError(
                f"clip has {length} samples, at least {half} are needed to carry a watermark"
            )
        spans = [(start, start + self.clip_len) for start in range(0, length - self.clip_len + 1, self.clip_len)]
        tail = spans[-1][1] if spans else 0
        if length - tail >= half:
            spans.append((tail, length))
        return spans

    def _batch(self, samples: torch.Tensor, spans: List[Segment]) -> torch.Tensor:
        rows = []
        for start, stop in spans:
            segment = samples[start:stop]
            rows.append(torch.nn.functional.pad(segment, (0, self.clip_len - segment.numel())))
        return torch.stack(rows)

    def _validate(self, wm: Optional[WatermarkBits], key: KeyBits) -> None:
        if len(key) != self.model.cfg.key_bits:
            raise KeyLengthError(f"key has {len(key)} bits, the model expects {self.model.cfg.key_bits}")
        if wm is not None and len(wm) != self.model.cfg.payload_bits:
            raise PayloadLengthError(f"watermark has {len(wm)} bits, the model expects {self.model.cfg.payload_bits}")

    def embed(self, clip: AudioClip, wm: WatermarkBits, key: KeyBits) -> AudioClip:
        """Embed ``wm`` under ``key`` into every segment of ``clip``.

        Args:
            clip: Carrier audio
            wm: Payload bits
            key: Control key, one bit per invertible block

        Returns:
            AudioClip: Watermarked audio of the same length

        Raises:
            KeyLengthError: If the key does not match the model
            PayloadLengthError: If the payload does not match the model
            ClipTooShortError: If the clip is shorter than half a segment
        """
        self._validate(wm, key)
        spans = self.segments(len(clip))
        try:
            with torch.no_grad():
                marked = self.model.embed(self._batch(clip.samples, spans), wm.to_tensor().unsqueeze(0), key)
        except KeymarkException:
            raise
        except Exception as e:
            self.logger.error(f"Embedding failed for a {len(clip)}-sample clip: {str(e)}")
            raise

        out = clip.samples.clone()
        for row, (start, stop) in zip(marked, spans):
            out[start:stop] = row[: stop - start]
        self.logger.debug(f"Embedded {wm.to_hex()} under key {key.to_hex()} into {len(spans)} segment(s)")
        return AudioClip(samples=out, sample_rate=clip.sample_rate)

    def decode(
        self,
        clip: AudioClip,
        key: KeyBits,
        source: RedundancySource = RedundancySource.PREDICT,
        generator: Optional[torch.Generator] = None,
    ) -> DecodeResult:
        """Recover the payload embedded under ``key``.

        Logits and confidences are averaged over segments; bits are the
        per-bit majority vote of the segment decodes.
        """
        self._validate(None, key)
        spans = self.segments(len(clip))
        with torch.no_grad():
            logits = self.model.decode(self._batch(clip.samples, spans), key, source, generator)
        seg_bits = (torch.sigmoid(logits) > 0.5).to(torch.long)
        votes = seg_bits.sum(dim=0)
        bits = (2 * votes > len(spans)).to(torch.long)
        mean_logits = logits.mean(dim=0).to(torch.float64)
        return DecodeResult(
            bits=WatermarkBits.from_tensor(bits),
            logits=tuple(mean_logits.tolist()),
            confidences=tuple(torch.sigmoid(mean_logits).tolist()),
            segments=len(spans),
        )

    def embed_stack(self, clip: AudioClip, stack: WatermarkStack) -> AudioClip:
        """Embed every (watermark, key) entry in order, each into the previous output."""
        for wm, key in stack.entries:
            self._validate(wm, key)
        marked = clip
        for wm, key in stack.entries:
            marked = self.embed(marked, wm, key)
        return marked

    def magnitude_grid(self, clip: AudioClip) -> np.ndarray:
        """Float32 |STFT| grid (F, T) of the whole clip for inspection."""
        with torch.no_grad():
            return magnitude(stft(clip.samples, self.model.cfg.stft)).numpy().astype(np.float32)
