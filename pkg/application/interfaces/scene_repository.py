"""
Abstract interface for storing synthetic scenes.
"""

from abc import ABC, abstractmethod
from typing import List

from domain.models.camera import CameraCalibration
from domain.models.scene import SyntheticScene


class AbstractSceneRepository(ABC):
    """Abstract base class for scene repositories."""

    @abstractmethod
    def save_scene(self, scene: SyntheticScene) -> None:
        """Persist a scene with its calibration, frames and pseudo labels.

        Args:
            scene: The scene to store.
        """
        pass

    @abstractmethod
    def load_scene(self) -> SyntheticScene:
        """Load the stored scene.

        Returns:
            The scene, with every referenced array read back.
        """
        pass

    @abstractmethod
    def load_cameras(self) -> List[CameraCalibration]:
        pass
