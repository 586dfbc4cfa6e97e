import logging
import threading
from typing import Dict, List, Optional

from ..entities import Checkpoint
from ..entities.exceptions import CheckpointIOError
from ..use_cases.interface.checkpoint_repository import ICheckpointRepository


def _copy(checkpoint: Checkpoint) -> Checkpoint:
    tensors = {name: t.detach().clone() for name, t in checkpoint.tensors.items()}
    return checkpoint.model_copy(update={"tensors": tensors})


class MemoryCheckpointRepository(ICheckpointRepository):
    """In-memory implementation of the checkpoint repository.

    Tensors are cloned on save and on load so stored snapshots never alias
    live parameters. Operations are guarded by a lock.
    """

    def __init__(self, logger: Optional[logging.Logger] = None, key_prefix: str = "checkpoint"):
        """Initialize memory checkpoint repository.

        Args:
            logger: Optional logger instance
            key_prefix: Prefix for stored names
        """
        self._data: Dict[str, Checkpoint] = {}
        self._lock = threading.Lock()
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self.key_prefix = key_prefix

    def _get_key(self, name: str) -> str:
        return f"{self.key_prefix}:{name}"

    def save(self, name: str, checkpoint: Checkpoint) -> str:
        key = self._get_key(name)
        with self._lock:
            self._data[key] = _copy(checkpoint)
        self.logger.debug(f"Stored checkpoint {key} at step {checkpoint.step}")
        return key

    def load(self, name: str) -> Checkpoint:
        key = self._get_key(name)
        with self._lock:
            if key not in self._data:
                raise CheckpointIOError(f"no checkpoint stored under '{name}'")
            return _copy(self._data[key])

    def exists(self, name: str) -> bool:
        with self._lock:
            return self._get_key(name) in self._data

    def delete(self, name: str) -> bool:
        with self._lock:
            return self._data.pop(self._get_key(name), None) is not None

    def list_names(self) -> List[str]:
        prefix = f"{self.key_prefix}:"
        with self._lock:
            return sorted(key[len(prefix) :] for key in self._data)

    def clear_all(self) -> None:
        """Remove every stored checkpoint."""
        with self._lock:
            count = len(self._data)
            self._data.clear()
        self.logger.info(f"Cleared {count} stored checkpoints")
