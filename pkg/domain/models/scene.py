"""
Domain models for synthetic multi-view scenes and the synthetic root dataset.
"""

from enum import Enum
from typing import List, Optional

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from domain.errors import ShapeMismatch
from domain.models.camera import CameraCalibration, VoxelGridSpec, Workspace
from domain.models.poses import Pose2DSet, Pose3DSet, SkeletonSpec
from domain.models.volumes import RootHeatmapSet


class NoisePreset(str, Enum):
    CLEAN = "clean"
    DEFAULT = "default"
    HEAVY = "heavy"


class PseudoNoiseModel(BaseModel):
    """Corruption applied to projected joints to imitate an off-the-shelf 2D detector"""

    model_config = ConfigDict(frozen=True)

    sigma_px: float = Field(2.0, ge=0.0, description="Gaussian pixel noise per coordinate")
    p_outlier: float = Field(0.05, ge=0.0, le=1.0, description="Probability a joint becomes a uniform in-image outlier")
    p_drop: float = Field(0.10, ge=0.0, le=1.0, description="Probability a whole person is missing from a view")
    confidence_scale_px: float = Field(8.0, gt=0.0, description="Pixel error where clean confidence decays to e^-0.5")
    clean_confidence_floor: float = Field(0.7, ge=0.0, le=1.0, description="Lowest confidence of a clean joint")
    outlier_confidence_range: tuple[float, float] = Field((0.05, 0.6), description="Confidence range of outliers")

    @classmethod
    def from_preset(cls, preset: NoisePreset) -> "PseudoNoiseModel":
        if preset == NoisePreset.CLEAN:
            return cls(sigma_px=0.0, p_outlier=0.0, p_drop=0.0)
        if preset == NoisePreset.HEAVY:
            return cls(sigma_px=4.0, p_outlier=0.15, p_drop=0.20)
        return cls()


class SceneFrame(BaseModel):
    """One multi-view capture instant"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: int
    gt_poses: Pose3DSet
    images: np.ndarray = Field(..., description="(C, H, W, 3) float32 in [0, 1]")
    pseudo_2d: Pose2DSet

    @model_validator(mode="after")
    def check_consistency(self) -> "SceneFrame":
        if self.images.ndim != 4 or self.images.shape[-1] != 3:
            raise ShapeMismatch(f"images must be (C, H, W, 3), got {self.images.shape}")
        if self.pseudo_2d.num_views != self.images.shape[0]:
            raise ShapeMismatch("pseudo 2D view count differs from image count")
        if self.pseudo_2d.num_persons > self.gt_poses.num_persons:
            raise ShapeMismatch("pseudo 2D poses cannot have more persons than the ground truth")
        return self

    def image_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        """Images as (C, 3, H, W)"""
        return torch.from_numpy(np.ascontiguousarray(self.images.transpose(0, 3, 1, 2))).to(dtype)


class SyntheticScene(BaseModel):
    """A calibrated rig plus a sequence of frames"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cams: List[CameraCalibration]
    skeleton: SkeletonSpec = Field(default_factory=SkeletonSpec)
    frames: List[SceneFrame] = Field(default_factory=list)
    workspace: Workspace = Field(default_factory=Workspace)
    seed: int = 0

    @model_validator(mode="after")
    def check_frames(self) -> "SyntheticScene":
        for frame in self.frames:
            if frame.images.shape[0] != len(self.cams):
                raise ShapeMismatch(f"frame {frame.id} has {frame.images.shape[0]} views, rig has {len(self.cams)}")
        return self

    def with_views(self, num_views: Optional[int]) -> "SyntheticScene":
        """The same scene restricted to its first num_views cameras"""
        if num_views is None or num_views >= len(self.cams):
            return self
        if num_views < 2:
            raise ShapeMismatch("at least two views are required")
        frames = [
            SceneFrame(
                id=f.id,
                gt_poses=f.gt_poses,
                images=f.images[:num_views],
                pseudo_2d=Pose2DSet(
                    joints=f.pseudo_2d.joints[:num_views],
                    confidence=f.pseudo_2d.confidence[:num_views],
                    visibility_mask=f.pseudo_2d.visibility_mask[:num_views],
                ),
            )
            for f in self.frames
        ]
        return SyntheticScene(
            cams=self.cams[:num_views], skeleton=self.skeleton, frames=frames, workspace=self.workspace, seed=self.seed
        )


class SyntheticRootSample(BaseModel):
    """One (G_syn*, H_root_syn) pair of the synthetic root dataset"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    gt_root_volume: torch.Tensor = Field(..., description="(X, Y, Z) target root volume in [0, 1]")
    root_heatmaps: RootHeatmapSet
    roots: List[tuple[float, float, float]] = Field(..., description="Sampled roots, mm")
    grid: VoxelGridSpec

    @model_validator(mode="after")
    def check_shape(self) -> "SyntheticRootSample":
        if tuple(self.gt_root_volume.shape) != tuple(self.grid.resolution):
            raise ShapeMismatch("gt_root_volume shape does not match its grid")
        return self
