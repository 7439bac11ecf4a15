"""
Domain models for loss hyper-parameters and the sections of the training configuration.
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StageName(str, Enum):
    PRETRAIN = "pretrain"
    ROOT = "root"
    POSE_L2 = "pose_l2"
    POSE_L1L2 = "pose_l1l2"

    @property
    def prerequisite(self) -> Optional["StageName"]:
        order = list(StageName)
        i = order.index(self)
        return order[i - 1] if i > 0 else None


class PseudoLabelMode(str, Enum):
    SOFT = "soft"
    HARD = "hard"
    SOFT_THEN_HARD = "soft_then_hard"


class RootInput(str, Enum):
    ROOT = "root"
    ALL_JOINTS = "all_joints"


class HyperParams(BaseModel):
    """Loss weights and decoding / detection settings"""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    lambda_: float = Field(0.01, alias="lambda", ge=0.0, description="Weight of the 2D joint loss")
    sigma_attn: float = Field(0.1, ge=0.0, description="Weight of the attention regularizer")
    beta: float = Field(100.0, gt=0.0, description="Soft-argmax inverse temperature")
    sigma_hm: float = Field(3.0, gt=0.0, description="Heatmap Gaussian width, heatmap pixels")
    nms_window: int = Field(3, description="3D NMS window, voxels")
    detection_threshold: float = Field(0.3, gt=0.0, le=1.0)
    max_proposals: int = Field(10, ge=1)

    @field_validator("nms_window")
    @classmethod
    def check_window(cls, v: int) -> int:
        if v < 3 or v % 2 == 0:
            raise ValueError("nms_window must be odd and >= 3")
        return v


class StageSchedule(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(..., ge=0)
    lr: float = Field(..., gt=0.0)
    lr_milestones: List[int] = Field(default_factory=list, description="Epochs at which lr is multiplied by 0.1")

    @field_validator("lr_milestones")
    @classmethod
    def check_milestones(cls, v: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(v, v[1:])) or any(m < 0 for m in v):
            raise ValueError("lr_milestones must be non-negative and strictly increasing")
        return v


def _ladder(epochs: int) -> List[int]:
    return sorted({math.ceil(epochs * 0.5), math.ceil(epochs * 0.75)})


class StagesConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pretrain: StageSchedule = Field(default_factory=lambda: StageSchedule(epochs=5, lr=1e-4, lr_milestones=_ladder(5)))
    root: StageSchedule = Field(default_factory=lambda: StageSchedule(epochs=1, lr=1e-4))
    pose_l2: StageSchedule = Field(default_factory=lambda: StageSchedule(epochs=5, lr=1e-4))
    pose_l1l2: StageSchedule = Field(default_factory=lambda: StageSchedule(epochs=5, lr=5e-5))

    def for_stage(self, stage: StageName) -> StageSchedule:
        return getattr(self, stage.value)


class AugmentationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    rotation_deg_min: float = -45.0
    rotation_deg_max: float = 45.0
    scale_min: float = -0.35
    scale_max: float = 0.35
    photometric: bool = True
    cutout_count: int = Field(2, ge=0)
    cutout_size_min: int = Field(20, ge=1)
    cutout_size_max: int = Field(40, ge=1)

    @model_validator(mode="after")
    def check_ranges(self) -> "AugmentationConfig":
        if self.rotation_deg_min > self.rotation_deg_max:
            raise ValueError("rotation range is not ordered")
        if self.scale_min > self.scale_max or self.scale_min <= -1.0:
            raise ValueError("scale range must be ordered and above -1")
        if self.cutout_size_min > self.cutout_size_max:
            raise ValueError("cutout size range is not ordered")
        return self


class LossConfig(BaseModel):
    """Switches for the ablation rows of the pose objective"""

    model_config = ConfigDict(extra="forbid")

    cross_view: bool = Field(True, description="Project each branch's poses into the other branch's image space")
    l2_attention: bool = Field(True, description="Soft per-pixel attention on the heatmap loss")
    l1_attention: bool = Field(True, description="Drop the worst view of the joint loss")
    train_attention_in_l2_stage: bool = Field(True, description="attn_net_2d also trains during pose_l2")


class PseudoLabelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: PseudoLabelMode = PseudoLabelMode.SOFT_THEN_HARD
    hard_threshold: float = Field(0.7, ge=0.0, le=1.0)
    hard_last_epochs: int = Field(2, ge=0)


class RootTrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    consistency: bool = Field(True, description="Add the root consistency loss on real frames")
    samples: int = Field(200, ge=0, description="Synthetic root samples per root epoch")
    max_roots: int = Field(4, ge=1)
    sigma_2d: float = Field(3.0, gt=0.0, description="Root heatmap Gaussian width, heatmap pixels")
    sigma_3d_voxels: float = Field(1.5, gt=0.0, description="Target root Gaussian width, coarse voxel pitches")


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    width_2d: int = Field(32, ge=4)
    width_attn: int = Field(16, ge=4)
    width_3d: int = Field(16, ge=4)
    root_input: RootInput = RootInput.ROOT
    attn_shared_backbone: bool = False


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    coarse_extent: Tuple[float, float, float] = (6000.0, 6000.0, 2000.0)
    coarse_resolution: Tuple[int, int, int] = (48, 48, 16)
    fine_extent: Tuple[float, float, float] = (2000.0, 2000.0, 2000.0)
    fine_resolution: Tuple[int, int, int] = (24, 24, 24)


class TrainingFlags(BaseModel):
    model_config = ConfigDict(extra="forbid")

    freeze_backbone: bool = False
