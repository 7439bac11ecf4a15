"""
Pytest configuration and fixtures for the pose pipeline tests.
"""

import sys
from pathlib import Path
from typing import List

# Add project root to Python path
project_root = Path(__file__).parent.parent.absolute()
sys.path.insert(0, str(project_root))

import numpy as np
import pytest
import torch

from application.use_cases.generate_scene import generate_scene
from config import TrainConfig
from domain.models.camera import CameraCalibration, VoxelGridSpec, Workspace
from domain.models.poses import SkeletonSpec
from domain.models.scene import NoisePreset, PseudoNoiseModel, SyntheticScene
from infrastructure.synthesis.camera_rig import make_camera_rig

SMALL_IMAGE = (64, 64)

TINY_OVERRIDES = {
    "model.width_2d": 4,
    "model.width_attn": 4,
    "model.width_3d": 4,
    "grid.coarse_resolution": [8, 8, 4],
    "grid.fine_resolution": [6, 6, 6],
    "stages.pretrain.epochs": 1,
    "stages.pretrain.lr_milestones": [],
    "stages.root.epochs": 1,
    "stages.pose_l2.epochs": 1,
    "stages.pose_l1l2.epochs": 1,
    "root.samples": 2,
    "root.max_roots": 2,
    "checkpoint_every": 2,
}


@pytest.fixture
def skeleton() -> SkeletonSpec:
    """Return the default 15-joint skeleton"""
    return SkeletonSpec()


@pytest.fixture
def workspace() -> Workspace:
    """Return the default capture workspace"""
    return Workspace()


@pytest.fixture
def simple_camera() -> CameraCalibration:
    """Return a camera at the origin looking down +z with f = 1000 and a 256x256 image"""
    return CameraCalibration(
        id=0,
        K=[[1000.0, 0.0, 128.0], [0.0, 1000.0, 128.0], [0.0, 0.0, 1.0]],
        R=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        t=[0.0, 0.0, 0.0],
        image_size=(256, 256),
    )


@pytest.fixture
def rig(workspace: Workspace) -> List[CameraCalibration]:
    """Return the default five-view rig with 256x256 images"""
    return make_camera_rig(5, workspace, seed=0)


@pytest.fixture
def small_rig(workspace: Workspace) -> List[CameraCalibration]:
    """Return a three-view rig with 64x64 images"""
    return make_camera_rig(3, workspace, seed=0, image_size=SMALL_IMAGE)


@pytest.fixture
def coarse_grid(workspace: Workspace) -> VoxelGridSpec:
    """Return a small coarse grid centered on the workspace"""
    return VoxelGridSpec(center=tuple(workspace.center), extent=(6000.0, 6000.0, 2000.0), resolution=(12, 12, 5))


@pytest.fixture
def clean_scene(workspace: Workspace) -> SyntheticScene:
    """Return a noise-free scene of 2 frames, 2 persons and 3 views at 64x64"""
    cams = make_camera_rig(3, workspace, seed=1, image_size=SMALL_IMAGE)
    return generate_scene(2, 2, 3, seed=1, noise=PseudoNoiseModel.from_preset(NoisePreset.CLEAN), cams=cams)


@pytest.fixture
def oracle_scene() -> SyntheticScene:
    """Return a noise-free scene on the default rig for oracle evaluation"""
    return generate_scene(3, 2, 5, seed=3, noise=PseudoNoiseModel.from_preset(NoisePreset.CLEAN))


@pytest.fixture
def tiny_config() -> TrainConfig:
    """Return a training config with tiny networks, grids and schedules"""
    return TrainConfig.from_file(None, TINY_OVERRIDES)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded numpy generator"""
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def torch_seed():
    """Seed torch for every test"""
    torch.manual_seed(0)
