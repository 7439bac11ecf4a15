"""
The synthetic root dataset: random 3D points, their 2D root heatmaps in
every view, and the Gaussian root volume root_net should predict from them.
"""

import logging
from typing import List, Sequence

import numpy as np
import torch

from application.utils.seeding import numpy_rng
from domain.models.camera import CameraCalibration, VoxelGridSpec, Workspace
from domain.models.scene import SyntheticRootSample
from domain.models.volumes import RootHeatmapSet
from domain.services.geometry import HEATMAP_STRIDE, MIN_DEPTH_MM, project_points, voxel_centers
from domain.services.rendering import render_gaussian_heatmap
from infrastructure.synthesis.skeleton import sample_roots

logger = logging.getLogger(__name__)

MIN_ROOT_SEPARATION_MM = 500.0


def render_root_heatmaps(
    roots: np.ndarray, cams: Sequence[CameraCalibration], sigma_2d: float, dtype: torch.dtype = torch.float32
) -> RootHeatmapSet:
    """Unit-amplitude Gaussians at each root's projection in every view it lies in front of"""
    pts = torch.as_tensor(np.asarray(roots, dtype=np.float64).reshape(-1, 3))
    maps = []
    for cam in cams:
        uv, depth = project_points(cam, pts)
        front = depth > MIN_DEPTH_MM
        hm = render_gaussian_heatmap(uv[front] / HEATMAP_STRIDE, cam.heatmap_size, sigma_2d)
        maps.append(hm)
    return RootHeatmapSet(data=torch.stack(maps).to(dtype))


def render_root_volume(
    roots: np.ndarray, grid: VoxelGridSpec, sigma_3d_mm: float, dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """Per-voxel maximum of isotropic 3D Gaussians around the roots, (X, Y, Z)"""
    centers = voxel_centers(grid)  # (X, Y, Z, 3)
    volume = torch.zeros(grid.resolution, dtype=torch.float64)
    for r in np.asarray(roots, dtype=np.float64).reshape(-1, 3):
        d2 = ((centers - torch.as_tensor(r)) ** 2).sum(-1)
        volume = torch.maximum(volume, torch.exp(-d2 / (2.0 * sigma_3d_mm**2)))
    return volume.to(dtype)


def generate_root_dataset(
    n_samples: int,
    cams: Sequence[CameraCalibration],
    workspace: Workspace,
    grid: VoxelGridSpec,
    max_roots: int,
    sigma_2d: float,
    sigma_3d: float,
    seed: int = 0,
) -> List[SyntheticRootSample]:
    """Samples with 1..max_roots roots uniform in the workspace, at least 500 mm apart.

    sigma_2d is in heatmap pixels and sigma_3d in mm.
    """
    if max_roots < 1:
        raise ValueError(f"max_roots must be >= 1, got {max_roots}")
    samples = []
    for i in range(n_samples):
        rng = numpy_rng(seed, "root-sample", i)
        k = int(rng.integers(1, max_roots + 1))
        roots = sample_roots(k, workspace, MIN_ROOT_SEPARATION_MM, rng)
        samples.append(
            SyntheticRootSample(
                gt_root_volume=render_root_volume(roots, grid, sigma_3d),
                root_heatmaps=render_root_heatmaps(roots, cams, sigma_2d),
                roots=[tuple(float(v) for v in r) for r in roots],
                grid=grid,
            )
        )
    logger.debug(f"Generated {len(samples)} synthetic root samples")
    return samples
