"""
Domain models for the tensors flowing through the voxel pipeline:
heatmaps, feature volumes, root volumes and person proposals.
"""

from enum import Enum
from typing import List, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from domain.errors import ShapeMismatch
from domain.models.camera import VoxelGridSpec
from domain.models.poses import Pose3DSet

_RANGE_TOL = 1e-6


def _check_unit_range(v: torch.Tensor, what: str) -> None:
    d = v.detach()
    if not torch.isfinite(d).all():
        raise ValueError(f"{what} contains non-finite values")
    if d.numel() and (d.min() < -_RANGE_TOL or d.max() > 1 + _RANGE_TOL):
        raise ValueError(f"{what} must lie in [0, 1]")


class HeatmapSource(str, Enum):
    """Where a heatmap set came from"""

    PREDICTED = "predicted"
    RENDERED_FROM_PROJECTION = "rendered_from_projection"
    RENDERED_FROM_PSEUDO = "rendered_from_pseudo"
    SYNTHETIC_ROOT = "synthetic_root"


class HeatmapSet(BaseModel):
    """Quarter-resolution per-joint heatmaps of C views"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: torch.Tensor = Field(..., description="(C, J, Hq, Wq) in [0, 1]")
    source: HeatmapSource = HeatmapSource.PREDICTED

    @field_validator("data")
    @classmethod
    def check_data(cls, v: torch.Tensor) -> torch.Tensor:
        if v.ndim != 4:
            raise ShapeMismatch(f"heatmaps must be (C, J, Hq, Wq), got {tuple(v.shape)}")
        _check_unit_range(v, "heatmaps")
        return v

    @property
    def num_views(self) -> int:
        return self.data.shape[0]

    @property
    def num_joints(self) -> int:
        return self.data.shape[1]

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.data.shape[2], self.data.shape[3]


class RootHeatmapSet(BaseModel):
    """Quarter-resolution root heatmaps of C views"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: torch.Tensor = Field(..., description="(C, Hq, Wq) in [0, 1]")

    @field_validator("data")
    @classmethod
    def check_data(cls, v: torch.Tensor) -> torch.Tensor:
        if v.ndim != 3:
            raise ShapeMismatch(f"root heatmaps must be (C, Hq, Wq), got {tuple(v.shape)}")
        _check_unit_range(v, "root heatmaps")
        return v

    def as_heatmap_set(self, source: HeatmapSource = HeatmapSource.PREDICTED) -> HeatmapSet:
        """Single-channel HeatmapSet view for unprojection"""
        return HeatmapSet(data=self.data[:, None], source=source)


class FeatureVolume(BaseModel):
    """Per-joint voxel features sampled from multi-view heatmaps"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: torch.Tensor = Field(..., description="(J, X, Y, Z)")
    grid: VoxelGridSpec

    @model_validator(mode="after")
    def check_shape(self) -> "FeatureVolume":
        if self.data.ndim != 4 or tuple(self.data.shape[1:]) != tuple(self.grid.resolution):
            raise ShapeMismatch(f"volume shape {tuple(self.data.shape)} does not match grid {self.grid.resolution}")
        if not torch.isfinite(self.data.detach()).all():
            raise ValueError("feature volume contains non-finite values")
        return self


class RootBranch(str, Enum):
    G0 = "G0"
    G1 = "G1"
    G2 = "G2"
    G_SYN = "G_syn"


class RootVolume(BaseModel):
    """Single-channel root score volume on the coarse grid"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: torch.Tensor = Field(..., description="(X, Y, Z) in [0, 1]")
    grid: VoxelGridSpec
    branch: RootBranch = RootBranch.G0

    @model_validator(mode="after")
    def check_shape(self) -> "RootVolume":
        if tuple(self.data.shape) != tuple(self.grid.resolution):
            shape = tuple(self.data.shape)
            raise ShapeMismatch(f"root volume shape {shape} does not match grid {self.grid.resolution}")
        _check_unit_range(self.data, "root volume")
        return self


class RootProposal(BaseModel):
    """A detected person root"""

    model_config = ConfigDict(frozen=True)

    position: Tuple[float, float, float] = Field(..., description="World position, mm")
    score: float = Field(..., ge=0.0, le=1.0 + _RANGE_TOL)
    voxel_index: Tuple[int, int, int]


class BottleneckPoses(BaseModel):
    """3D poses estimated under the two augmented branches, one per proposal"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    Y1: Pose3DSet
    Y2: Pose3DSet
    proposals: List[RootProposal] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_counts(self) -> "BottleneckPoses":
        if self.Y1.num_persons != len(self.proposals) or self.Y2.num_persons != len(self.proposals):
            raise ShapeMismatch("Y1, Y2 and proposals must have the same person count")
        return self

    @property
    def is_empty(self) -> bool:
        return len(self.proposals) == 0
