from .checkpoint_repository import ICheckpointRepository

__all__ = ["ICheckpointRepository"]
