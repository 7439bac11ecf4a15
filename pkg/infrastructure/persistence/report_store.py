"""
JSON evaluation reports and the JSON-lines training loss log.
"""

import json
import logging
from pathlib import Path
from typing import List

from pydantic import ValidationError

from application.interfaces.report_repository import AbstractLossLog, AbstractReportRepository, LossRecord
from domain.errors import FormatError
from domain.models.report import REPORT_SCHEMA, AblationResult, EvalReport

logger = logging.getLogger(__name__)

LOSS_LOG_FILE = "loss_log.jsonl"


class JsonReportRepository(AbstractReportRepository):
    def save_report(self, report: EvalReport, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(by_alias=True, indent=2))
        logger.info(f"Wrote evaluation report to {path}")

    def load_report(self, path: Path) -> EvalReport:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise FormatError(f"cannot read report {path}: {e}") from e
        if raw.get("schema") != REPORT_SCHEMA:
            raise FormatError(f"report {path} has schema {raw.get('schema')!r}, expected {REPORT_SCHEMA!r}")
        try:
            return EvalReport.model_validate(raw)
        except ValidationError as e:
            raise FormatError(f"invalid report {path}: {e}") from e

    def save_ablation(self, result: AblationResult, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(result.model_dump_json(by_alias=True, indent=2))
        logger.info(f"Wrote ablation sweep over {result.param} to {path}")


class JsonLinesLossLog(AbstractLossLog):
    def __init__(self, path: Path):
        self.path = Path(path)

    def append(self, record: LossRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as f:
            f.write(record.model_dump_json() + "\n")

    def read(self) -> List[LossRecord]:
        if not self.path.is_file():
            return []
        records = []
        for n, line in enumerate(self.path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(LossRecord.model_validate_json(line))
            except ValidationError as e:
                raise FormatError(f"{self.path}:{n}: bad loss record: {e}") from e
        return records

    def truncate_after(self, stage: str, step: int) -> None:
        if not self.path.is_file():
            return
        kept = [r for r in self.read() if not (r.stage == stage and r.step > step)]
        self.path.write_text("".join(r.model_dump_json() + "\n" for r in kept))
