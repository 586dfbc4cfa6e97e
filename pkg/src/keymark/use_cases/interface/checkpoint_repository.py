from abc import ABC, abstractmethod
from typing import List

from ...entities import Checkpoint


class ICheckpointRepository(ABC):
    """Abstract interface for checkpoint storage.

    This interface defines the contract that checkpoint repositories
    must implement for storing and retrieving training snapshots.
    """

    @abstractmethod
    def save(self, name: str, checkpoint: Checkpoint) -> str:
        """Store a checkpoint under ``name``, replacing any previous one.

        Args:
            name: Checkpoint identifier
            checkpoint: Snapshot to store

        Returns:
            str: Location the checkpoint was stored at
        """
        pass

    @abstractmethod
    def load(self, name: str) -> Checkpoint:
        """Load the checkpoint stored under ``name``.

        Args:
            name: Checkpoint identifier

        Returns:
            Checkpoint: The stored snapshot

        Raises:
            CheckpointIOError: If nothing is stored under ``name``
            CheckpointFormatError: If the stored data is not a valid checkpoint
        """
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Check whether a checkpoint is stored under ``name``."""
        pass

    @abstractmethod
    def delete(self, name: str) -> bool:
        """Remove the checkpoint stored under ``name``.

        Returns:
            bool: True if something was removed
        """
        pass

    @abstractmethod
    def list_names(self) -> List[str]:
        """Names of all stored checkpoints, sorted."""
        pass
