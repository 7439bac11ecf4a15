"""
Abstract interfaces for evaluation reports and the training loss log.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import List

from pydantic import BaseModel

from domain.models.report import AblationResult, EvalReport


class LossRecord(BaseModel):
    step: int
    stage: str
    loss_total: float
    loss_H: float = 0.0
    loss_J: float = 0.0
    loss_attn: float = 0.0


class AbstractReportRepository(ABC):
    """Abstract base class for report storage."""

    @abstractmethod
    def save_report(self, report: EvalReport, path: Path) -> None:
        pass

    @abstractmethod
    def load_report(self, path: Path) -> EvalReport:
        pass

    @abstractmethod
    def save_ablation(self, result: AblationResult, path: Path) -> None:
        pass


class AbstractLossLog(ABC):
    """Append-only per-step loss history."""

    @abstractmethod
    def append(self, record: LossRecord) -> None:
        pass

    @abstractmethod
    def read(self) -> List[LossRecord]:
        pass

    @abstractmethod
    def truncate_after(self, stage: str, step: int) -> None:
        """Drop records of a stage beyond a step, used when resuming"""
        pass
