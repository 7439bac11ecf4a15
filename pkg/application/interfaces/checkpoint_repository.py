"""
Abstract interface for training checkpoints.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional

import torch
from pydantic import BaseModel, ConfigDict, Field

from domain.models.training import StageName


class CheckpointState(BaseModel):
    """Everything needed to rebuild a bundle and resume its stage"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    architecture: Dict[str, object]
    stage: StageName
    step: int = 0
    epoch: int = 0
    completed: bool = False
    parameters: Dict[str, torch.Tensor] = Field(default_factory=dict)
    optimizer: Optional[Dict[str, object]] = None
    scheduler: Optional[Dict[str, object]] = None


class AbstractCheckpointRepository(ABC):
    """Abstract base class for checkpoint stores."""

    @abstractmethod
    def save(self, state: CheckpointState, name: Optional[str] = None) -> Path:
        """Write a checkpoint.

        Args:
            state: Parameters, optimizer and scheduler state and progress of a stage.
            name: File name; defaults to the stage's canonical name.

        Returns:
            Path of the written file.
        """
        pass

    @abstractmethod
    def load(self, path: Path) -> CheckpointState:
        pass

    @abstractmethod
    def find(self, stage: StageName, completed_only: bool = True) -> Optional[Path]:
        """Path of the stored checkpoint of a stage, or None"""
        pass

    @abstractmethod
    def list(self) -> List[Path]:
        pass
