"""
Domain models for evaluation results.
"""

from typing import Any, Dict, List

from pydantic import BaseModel, ConfigDict, Field, model_validator

REPORT_SCHEMA = "selfpose3d-report/1"
AP_INTERPOLATION = "all-points interpolated AP over the precision envelope"


class MatchCounts(BaseModel):
    matched: int = 0
    missed: int = 0
    false_positive: int = 0


class PcpResult(BaseModel):
    per_actor: Dict[str, float] = Field(default_factory=dict)
    average: float = 0.0


class PrCurve(BaseModel):
    recall: List[float] = Field(default_factory=list)
    precision: List[float] = Field(default_factory=list)


class RootMetrics(BaseModel):
    """Detection quality of root proposals alone"""

    ap_50: float = 0.0
    ap_100: float = 0.0
    mean_error_mm: float = 0.0


class FramePrediction(BaseModel):
    id: int
    poses: List[List[List[float]]] = Field(default_factory=list, description="(P, J, 3) predicted joints, mm")
    scores: List[float] = Field(default_factory=list)


class EvalReport(BaseModel):
    """Versioned evaluation report"""

    model_config = ConfigDict(populate_by_name=True)

    schema_: str = Field(REPORT_SCHEMA, alias="schema")
    interpolation: str = AP_INTERPOLATION
    ap: Dict[str, float] = Field(default_factory=dict, description="Threshold (mm) -> AP")
    recall_500: float = 0.0
    mpjpe_mm: float = 0.0
    pcp: PcpResult = Field(default_factory=PcpResult)
    counts: MatchCounts = Field(default_factory=MatchCounts)
    root: RootMetrics = Field(default_factory=RootMetrics)
    pr_curves: Dict[str, PrCurve] = Field(default_factory=dict)
    frames: List[FramePrediction] = Field(default_factory=list)
    pair_errors_mm: List[float] = Field(default_factory=list, description="MPJPE of every matched pair")
    meta: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_ranges(self) -> "EvalReport":
        fractions = [self.recall_500, self.pcp.average, *self.ap.values(), *self.pcp.per_actor.values()]
        if any(not (0.0 <= f <= 1.0) for f in fractions):
            raise ValueError("report fractions must lie in [0, 1]")
        if self.mpjpe_mm < 0:
            raise ValueError("mpjpe_mm must be non-negative")
        values = [self.ap[k] for k in sorted(self.ap, key=float)]
        if any(b < a - 1e-12 for a, b in zip(values, values[1:])):
            raise ValueError("AP must be non-decreasing in the threshold")
        return self


class AblationRow(BaseModel):
    value: Any
    report: EvalReport


class AblationResult(BaseModel):
    """One evaluation per value of a swept config key"""

    param: str
    rows: List[AblationRow] = Field(default_factory=list)
