"""
Abstract interface for the synthetic root dataset.
"""

from abc import ABC, abstractmethod
from typing import List, Sequence

from domain.models.camera import CameraCalibration
from domain.models.scene import SyntheticRootSample


class AbstractRootDatasetRepository(ABC):
    """Abstract base class for root dataset repositories."""

    @abstractmethod
    def save_samples(
        self, samples: Sequence[SyntheticRootSample], cams: Sequence[CameraCalibration], seed: int
    ) -> None:
        pass

    @abstractmethod
    def load_samples(self) -> List[SyntheticRootSample]:
        pass

    @abstractmethod
    def load_cameras(self) -> List[CameraCalibration]:
        pass
