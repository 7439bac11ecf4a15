"""
Use Case: Generate the synthetic root dataset for a calibrated rig.
"""

import logging
from typing import List, Optional, Sequence

from application.interfaces.root_dataset_repository import AbstractRootDatasetRepository
from domain.models.camera import CameraCalibration, VoxelGridSpec, Workspace
from domain.models.scene import SyntheticRootSample
from domain.models.training import GridConfig, RootTrainingConfig
from infrastructure.synthesis.root_dataset import generate_root_dataset

logger = logging.getLogger(__name__)


def coarse_grid_for(workspace: Workspace, grid_config: Optional[GridConfig] = None) -> VoxelGridSpec:
    """The coarse root grid centered on the workspace"""
    grid_config = grid_config or GridConfig()
    return VoxelGridSpec(
        center=tuple(float(c) for c in workspace.center),
        extent=grid_config.coarse_extent,
        resolution=grid_config.coarse_resolution,
    )


def sigma_3d_mm(grid: VoxelGridSpec, sigma_voxels: float) -> float:
    """Target Gaussian width in mm from a width in mean voxel pitches"""
    return float(sigma_voxels * grid.pitch.mean())


class GenerateRootDatasetUseCase:
    def __init__(self, repo: AbstractRootDatasetRepository):
        self.repo = repo

    def execute(
        self,
        cams: Sequence[CameraCalibration],
        n_samples: int,
        max_roots: int,
        seed: int = 0,
        workspace: Optional[Workspace] = None,
        grid_config: Optional[GridConfig] = None,
        root_config: Optional[RootTrainingConfig] = None,
    ) -> List[SyntheticRootSample]:
        logger.info(f"Executing GenerateRootDatasetUseCase: {n_samples} samples, up to {max_roots} roots, seed {seed}")
        workspace = workspace or Workspace()
        root_config = root_config or RootTrainingConfig()
        grid = coarse_grid_for(workspace, grid_config)
        samples = generate_root_dataset(
            n_samples,
            cams,
            workspace,
            grid,
            max_roots,
            root_config.sigma_2d,
            sigma_3d_mm(grid, root_config.sigma_3d_voxels),
            seed=seed,
        )
        self.repo.save_samples(samples, cams, seed)
        return samples
