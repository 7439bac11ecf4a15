"""
Abstract interface for rendering evaluation and training figures to files.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional, Sequence

from application.interfaces.report_repository import LossRecord
from domain.models.report import EvalReport
from domain.models.scene import SyntheticScene


class AbstractReportPlotter(ABC):
    """Abstract base class for figure writers."""

    @abstractmethod
    def plot_pr_curves(self, report: EvalReport, out_dir: Path) -> Path:
        pass

    @abstractmethod
    def plot_ap_bars(self, report: EvalReport, out_dir: Path) -> Path:
        pass

    @abstractmethod
    def plot_mpjpe_histogram(self, report: EvalReport, out_dir: Path) -> Optional[Path]:
        pass

    @abstractmethod
    def plot_loss_curves(self, records: Sequence[LossRecord], out_dir: Path) -> Optional[Path]:
        pass

    @abstractmethod
    def plot_overlays(
        self, report: EvalReport, scene: SyntheticScene, out_dir: Path, max_frames: int = 2
    ) -> List[Path]:
        """Predicted skeletons projected onto the scene's views"""
        pass
