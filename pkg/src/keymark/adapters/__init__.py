"""Adapters for external systems integration."""

from .binary_checkpoint_repository import BinaryCheckpointRepository, decode_checkpoint, encode_checkpoint
from .config_loader import load_run_config, load_train_config
from .memory_checkpoint_repository import MemoryCheckpointRepository
from .wav_io import read_wav, wav_subtype, write_wav

__all__ = [
    "BinaryCheckpointRepository",
    "MemoryCheckpointRepository",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_run_config",
    "load_train_config",
    "read_wav",
    "wav_subtype",
    "write_wav",
]
