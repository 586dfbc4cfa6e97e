"""Checkpoint container on disk.

Layout, all integers little-endian u32:

    b"WAKE" | version | meta length | meta JSON (config, step, rng state)
    | tensor count | records

Each record is name length, UTF-8 name, rank, rank dims and the tensor data
as little-endian float32 values in row-major order.
"""

import base64
import json
import logging
import os
import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from pydantic import ValidationError

from ..entities import CHECKPOINT_VERSION, Checkpoint, TrainConfig
from ..entities.exceptions import CheckpointFormatError, CheckpointIOError
from ..use_cases.interface.checkpoint_repository import ICheckpointRepository

MAGIC = b"WAKE"
SUFFIX = ".wake"
_U32 = struct.Struct("<I")


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialise a checkpoint to the binary container."""
    meta = {
        "config": checkpoint.config.model_dump(mode="json"),
        "step": checkpoint.step,
        "rng_state": base64.b64encode(checkpoint.rng_state).decode("ascii") if checkpoint.rng_state else None,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")

    parts = [MAGIC, _U32.pack(checkpoint.version), _U32.pack(len(meta_bytes)), meta_bytes]
    parts.append(_U32.pack(len(checkpoint.tensors)))
    for name, tensor in checkpoint.tensors.items():
        name_bytes = name.encode("utf-8")
        data = tensor.detach().cpu().contiguous().numpy().astype("<f4", copy=False)
        parts.append(_U32.pack(len(name_bytes)))
        parts.append(name_bytes)
        parts.append(_U32.pack(tensor.dim()))
        parts.extend(_U32.pack(d) for d in tensor.shape)
        parts.append(data.tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise CheckpointFormatError(f"truncated checkpoint: {what} needs {n} bytes at offset {self.offset}")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse the binary container.

    Raises:
        CheckpointFormatError: On a bad magic, unsupported version, truncated
            record or invalid metadata
    """
    reader = _Reader(data)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointFormatError("not a checkpoint: bad magic bytes")
    version = reader.u32("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}")

    try:
        meta = json.loads(reader.take(reader.u32("meta length"), "meta").decode("utf-8"))
        config = TrainConfig.model_validate(meta["config"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, ValidationError) as e:
        raise CheckpointFormatError(f"invalid checkpoint metadata: {e}")

    tensors = {}
    for index in range(reader.u32("tensor count")):
        name = reader.take(reader.u32(f"record {index} name length"), f"record {index} name").decode("utf-8")
        rank = reader.u32(f"{name} rank")
        shape: Tuple[int, ...] = tuple(reader.u32(f"{name} dim {d}") for d in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(4 * count, f"{name} data")
        array = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
        tensors[name] = torch.from_numpy(array.copy())
    if reader.offset != len(data):
        raise CheckpointFormatError(f"{len(data) - reader.offset} trailing bytes after the last record")

    rng_state = meta.get("rng_state")
    return Checkpoint(
        version=version,
        tensors=tensors,
        config=config,
        step=int(meta.get("step", 0)),
        rng_state=base64.b64decode(rng_state) if rng_state else None,
    )


class BinaryCheckpointRepository(ICheckpointRepository):
    """Stores checkpoints as ``<name>.wake`` files under a directory.

    Names that already carry a suffix or are absolute paths are used as given.
    """

    def __init__(self, directory: Union[str, Path] = ".", logger: Optional[logging.Logger] = None):
        self.directory = Path(directory)
        self.logger = logger or logging.getLogger(self.__class__.__name__)

    def path_for(self, name: str) -> Path:
        path = Path(name)
        if not path.suffix:
            path = path.with_suffix(SUFFIX)
        return path if path.is_absolute() else self.directory / path

    def save(self, name: str, checkpoint: Checkpoint) -> str:
        path = self.path_for(name)
        tmp = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_bytes(encode_checkpoint(checkpoint))
            os.replace(tmp, path)
        except OSError as e:
            self.logger.error(f"Failed to write checkpoint {path}: {str(e)}")
            raise CheckpointIOError(f"cannot write checkpoint {path}: {e}")
        self.logger.info(f"Saved checkpoint {path} (step {checkpoint.step}, {len(checkpoint.tensors)} tensors)")
        return str(path)

    def load(self, name: str) -> Checkpoint:
        path = self.path_for(name)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise CheckpointIOError(f"cannot read checkpoint {path}: {e}")
        checkpoint = decode_checkpoint(data)
        self.logger.debug(f"Loaded checkpoint {path} at step {checkpoint.step}")
        return checkpoint

    def exists(self, name: str) -> bool:
        return self.path_for(name).is_file()

    def delete(self, name: str) -> bool:
        path = self.path_for(name)
        if not path.is_file():
            return False
        path.unlink()
        return True

    def list_names(self) -> List[str]:
        if not self.directory.is_dir():
            return []
        return sorted(p.stem for p in self.directory.glob(f"*{SUFFIX}"))
