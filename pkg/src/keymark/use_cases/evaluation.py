import logging
import math
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from ..core.attacks import attack_clip
from ..core.codec import ber, sample_key, sample_watermark
from ..core.losses import MultiScaleMelLoss
from ..core.metrics import snr, spectral_distance
from ..core.model import WatermarkModel
from ..entities import (
    AttackConfig,
    AudioClip,
    KeyBits,
    MetricsReport,
    MetricsRow,
    RedundancySource,
    RunConfig,
    WatermarkBits,
    WatermarkStack,
)
from ..entities.exceptions import ConfigurationError, KeySpaceExhaustedError
from .watermarking import WatermarkingUseCase

Cell = Tuple[int, int]


def scenario_label(depth: int) -> str:
    """``single``, ``double`` or ``<n>-fold`` for an embedding depth."""
    if depth == 1:
        return "single"
    if depth == 2:
        return "double"
    return f"{depth}-fold"


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Population mean and std; any infinite value makes the mean inf and the std 0."""
    array = np.asarray(values, dtype=np.float64)
    if np.isinf(array).any():
        return math.inf, 0.0
    return float(array.mean()), float(array.std())


class EvaluationUseCase:
    """Use case for producing BER / SNR / spectral-distance reports.

    For an embedding depth n, each trial embeds n distinct payloads under n
    distinct non-zero keys in sequence, applies one editing operation to the
    final audio and decodes with each of the n keys plus one fresh wrong key
    (index n + 1). Cell (i, j) compares payload j with the decode under key i.
    SNR and spectral distance compare the original clip with the audio after
    the j-th embedding, before editing.
    """

    def __init__(
        self,
        model: WatermarkModel,
        logger: Optional[logging.Logger] = None,
        mel: Optional[MultiScaleMelLoss] = None,
    ):
        self.model = model
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self.watermarking = WatermarkingUseCase(model, logger=self.logger)
        self.mel = mel or MultiScaleMelLoss()

    def _draw(
        self, depth: int, generator: torch.Generator
    ) -> Tuple[List[WatermarkBits], List[KeyBits], KeyBits]:
        n_bits = self.model.cfg.key_bits
        zero = KeyBits(bits=(0,) * n_bits)
        keys: List[KeyBits] = []
        wms: List[WatermarkBits] = []
        for _ in range(depth):
            keys.append(sample_key(generator, n_bits, [zero, *keys]))
            wms.append(sample_watermark(generator, self.model.cfg.payload_bits, wms))
        return wms, keys, sample_key(generator, n_bits, keys)

    def _trial(
        self,
        clip: AudioClip,
        depth: int,
        attack: AttackConfig,
        source: RedundancySource,
        generator: torch.Generator,
    ) -> Tuple[Dict[Cell, float], List[float], List[float]]:
        wms, keys, wrong = self._draw(depth, generator)
        stack = WatermarkStack.of(zip(wms, keys))
        marked: List[AudioClip] = []
        current = clip
        for wm, key in stack.entries:
            current = self.watermarking.embed(current, wm, key)
            marked.append(current)
        edited = attack_clip(current, attack, generator)

        cells: Dict[Cell, float] = {}
        for i, key in enumerate([*keys, wrong], start=1):
            decoded = self.watermarking.decode(edited, key, source, generator).bits
            for j, wm in enumerate(wms, start=1):
                cells[(i, j)] = ber(wm, decoded)
        snrs = [snr(clip.samples, m.samples) for m in marked]
        distances = [spectral_distance(clip.samples, m.samples, self.mel) for m in marked]
        return cells, snrs, distances

    def evaluate(
        self,
        clips: Sequence[AudioClip],
        scenarios: Sequence[int],
        attacks: Sequence[AttackConfig],
        seed: int = 0,
        repetitions: int = 5,
        source: RedundancySource = RedundancySource.PREDICT,
        deterministic: bool = True,
    ) -> MetricsReport:
        """Aggregate every (scenario, attack, i, j) cell over ``repetitions`` x ``clips`` trials.

        Raises:
            ConfigurationError: If there are no clips
            KeySpaceExhaustedError: If a depth needs more keys than the key space holds
        """
        if not clips:
            raise ConfigurationError("evaluation needs at least one clip")
        space = 2**self.model.cfg.key_bits
        for depth in scenarios:
            if depth + 1 > space:
                raise KeySpaceExhaustedError(
                    f"depth {depth} needs {depth} non-zero keys and a wrong key; {space} keys exist"
                )

        previous_threads = torch.get_num_threads()
        if deterministic:
            torch.set_num_threads(1)
        generator = torch.Generator().manual_seed(seed)
        rows: List[MetricsRow] = []
        self.model.eval()
        try:
            for depth in scenarios:
                for attack in attacks:
                    bers: Dict[Cell, List[float]] = defaultdict(list)
                    snrs: Dict[int, List[float]] = defaultdict(list)
                    distances: Dict[int, List[float]] = defaultdict(list)
                    for _ in range(repetitions):
                        for clip in clips:
                            cells, trial_snrs, trial_distances = self._trial(clip, depth, attack, source, generator)
                            for cell, value in cells.items():
                                bers[cell].append(value)
                            for j, (s, d) in enumerate(zip(trial_snrs, trial_distances), start=1):
                                snrs[j].append(s)
                                distances[j].append(d)
                    rows.extend(self._rows(depth, attack, bers, snrs, distances))
                    self.logger.info(
                        f"Evaluated {scenario_label(depth)} / {attack.op.value}: "
                        f"{repetitions * len(clips)} trials"
                    )
        finally:
            if deterministic:
                torch.set_num_threads(previous_threads)
        return MetricsReport(rows=rows)

    @staticmethod
    def _rows(
        depth: int,
        attack: AttackConfig,
        bers: Dict[Cell, List[float]],
        snrs: Dict[int, List[float]],
        distances: Dict[int, List[float]],
    ) -> List[MetricsRow]:
        rows = []
        for j in range(1, depth + 1):
            snr_mean, snr_std = _mean_std(snrs[j])
            for i in range(1, depth + 2):
                ber_mean, ber_std = _mean_std(bers[(i, j)])
                rows.append(
                    MetricsRow(
                        scenario=scenario_label(depth),
                        j=j,
                        i=i,
                        attack=attack.op,
                        ber_mean=ber_mean,
                        ber_std=ber_std,
                        snr_mean=snr_mean,
                        snr_std=snr_std,
                        specdist_mean=float(np.mean(distances[j])),
                        trials=len(bers[(i, j)]),
                    )
                )
        return rows

    def run(self, config: RunConfig, clips: Sequence[AudioClip]) -> MetricsReport:
        """:meth:`evaluate` with the scenarios, attacks and seed of ``config``."""
        return self.evaluate(
            clips,
            config.scenarios,
            config.attacks,
            seed=config.seed,
            repetitions=config.repetitions,
            source=config.redundancy_source,
        )
