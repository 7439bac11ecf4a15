"""
Manifest documents describing datasets stored as JSON plus TensorBlob files.
"""

from typing import List, Tuple

from pydantic import BaseModel, Field, model_validator

from domain.models.camera import CameraCalibration, VoxelGridSpec, Workspace
from domain.models.poses import SkeletonSpec


class FrameEntry(BaseModel):
    id: int
    gt_poses_blob: str
    pseudo_2d_blob: str = Field(..., description="(C, P, J, 4) blob: u, v, confidence, visibility")
    image_blobs: List[str] = Field(..., description="One (H, W, 3) blob per view")


class SceneManifest(BaseModel):
    skeleton: SkeletonSpec
    cameras: List[CameraCalibration]
    frames: List[FrameEntry] = Field(default_factory=list)
    workspace: Workspace
    seed: int

    @model_validator(mode="after")
    def check_views(self) -> "SceneManifest":
        for frame in self.frames:
            if len(frame.image_blobs) != len(self.cameras):
                raise ValueError(f"frame {frame.id} lists {len(frame.image_blobs)} views, rig has {len(self.cameras)}")
        return self


class RootSampleEntry(BaseModel):
    id: int
    gt_root_volume_blob: str
    root_heatmaps_blob: str
    roots: List[Tuple[float, float, float]]


class RootDatasetManifest(BaseModel):
    cameras: List[CameraCalibration]
    grid: VoxelGridSpec
    samples: List[RootSampleEntry] = Field(default_factory=list)
    seed: int
