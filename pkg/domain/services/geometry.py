"""
Camera geometry kernels: projection, image-space affine maps, voxel grids,
heatmap unprojection into feature volumes and DLT triangulation.

All kernels are pure; torch kernels are differentiable with respect to their
tensor inputs and keep the dtype of those inputs.
"""

import logging
from typing import Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from domain.errors import BehindCamera, DegenerateConfiguration, ShapeMismatch, SingularTransform
from domain.models.camera import AffineAugmentation, CameraCalibration, VoxelGridSpec
from domain.models.volumes import FeatureVolume, HeatmapSet

logger = logging.getLogger(__name__)

HEATMAP_STRIDE = 4
MIN_DEPTH_MM = 1e-6


def _as_tensor(x, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=dtype)


def voxel_centers(grid: VoxelGridSpec, dtype: torch.dtype = torch.float64, device=None) -> torch.Tensor:
    """World positions of all voxel centers, shape (X, Y, Z, 3)"""
    axes = [
        torch.linspace(lo, hi, n, dtype=dtype, device=device)
        for lo, hi, n in zip(grid.lower.tolist(), grid.upper.tolist(), grid.resolution)
    ]
    gx, gy, gz = torch.meshgrid(*axes, indexing="ij")
    return torch.stack([gx, gy, gz], dim=-1)


def world_to_camera(cam: CameraCalibration, x_world: torch.Tensor) -> torch.Tensor:
    _, R, t = cam.tensors(dtype=x_world.dtype, device=x_world.device)
    return x_world @ R.T + t


def project_points(cam: CameraCalibration, x_world: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Batched pinhole projection without depth checks.

    Returns:
        (uv, depth): pixel coordinates (..., 2) and camera-frame depth (...,).
        Depth is clamped only inside the division, so points behind the
        camera get finite but meaningless pixels; callers mask them by depth.
    """
    x_world = _as_tensor(x_world)
    K, _, _ = cam.tensors(dtype=x_world.dtype, device=x_world.device)
    xc = world_to_camera(cam, x_world)
    depth = xc[..., 2]
    p = xc @ K.T
    w = p[..., 2].clamp(min=MIN_DEPTH_MM)
    return p[..., :2] / w[..., None], depth


def project_point(cam: CameraCalibration, x_world) -> torch.Tensor:
    """Projects one world point (mm) to pixels; raises BehindCamera for depth <= 1e-6 mm"""
    x = _as_tensor(x_world)
    if x.shape != (3,):
        raise ShapeMismatch(f"expected a 3-vector, got {tuple(x.shape)}")
    uv, depth = project_points(cam, x)
    if float(depth.detach()) <= MIN_DEPTH_MM:
        raise BehindCamera(f"point at depth {float(depth):.6g} mm is behind camera {cam.id}")
    return uv


def apply_affine(t: AffineAugmentation, uv) -> torch.Tensor:
    """Maps pixel coordinates (..., 2) through the augmentation matrix"""
    uv = _as_tensor(uv)
    A = t.matrix_tensor(dtype=uv.dtype, device=uv.device)
    return uv @ A[:, :2].T + A[:, 2]


def invert_affine(t: AffineAugmentation) -> AffineAugmentation:
    """Inverse augmentation: opposite rotation and reciprocal scale about the same pivot"""
    if abs(t.det) <= 1e-9:
        raise SingularTransform(f"augmentation with det {t.det:.3g} has no inverse")
    return AffineAugmentation(rotation_deg=-t.rotation_deg, scale=1.0 / (1.0 + t.scale) - 1.0, pivot=t.pivot)


def unproject_heatmaps(
    H: HeatmapSet,
    cams: Sequence[CameraCalibration],
    grid: VoxelGridSpec,
    t: AffineAugmentation,
    clamp: bool = True,
) -> FeatureVolume:
    """Samples multi-view heatmaps at every voxel's projection and averages the views that see it.

    Each voxel center is projected into view c, mapped into the augmented image
    by t, scaled to heatmap pixels and bilinearly sampled. Views where the
    sample falls outside the heatmap or behind the camera are left out of the
    average; voxels seen by no view are zero. With clamp=False the raw average
    is returned (it is linear in H).
    """
    data = H.data
    C, J, Hq, Wq = data.shape
    if len(cams) != C:
        raise ShapeMismatch(f"{C} heatmap views but {len(cams)} cameras")
    for cam in cams:
        if cam.heatmap_size != (Hq, Wq):
            raise ShapeMismatch(f"camera {cam.id} expects heatmaps {cam.heatmap_size}, got {(Hq, Wq)}")

    centers = voxel_centers(grid, dtype=data.dtype, device=data.device).reshape(-1, 3)
    N = centers.shape[0]
    acc = data.new_zeros((J, N))
    count = data.new_zeros((N,))
    for c, cam in enumerate(cams):
        uv, depth = project_points(cam, centers)
        hm = apply_affine(t, uv) / HEATMAP_STRIDE
        inside = (
            (depth > MIN_DEPTH_MM) & (hm[:, 0] >= 0) & (hm[:, 0] <= Wq - 1) & (hm[:, 1] >= 0) & (hm[:, 1] <= Hq - 1)
        )
        hm = torch.where(inside[:, None], hm, torch.full_like(hm, -2.0))
        norm = torch.stack([hm[:, 0] * 2.0 / (Wq - 1) - 1.0, hm[:, 1] * 2.0 / (Hq - 1) - 1.0], dim=-1)
        sample = F.grid_sample(
            data[c : c + 1], norm.view(1, 1, N, 2), mode="bilinear", padding_mode="zeros", align_corners=True
        ).view(J, N)
        w = inside.to(data.dtype)
        acc = acc + sample * w
        count = count + w
    volume = acc / count.clamp(min=1.0)
    if clamp:
        volume = volume.clamp(0.0, 1.0)
    return FeatureVolume(data=volume.view(J, *grid.resolution), grid=grid)


def triangulate_dlt(observations: Sequence[Tuple[CameraCalibration, Sequence[float]]]) -> np.ndarray:
    """Linear triangulation of one point from two or more calibrated pixel observations.

    Pixels are normalized by image size and world units are scaled to meters
    before the SVD; the result is returned in mm.
    """
    if len(observations) < 2:
        raise DegenerateConfiguration(f"need at least 2 observations, got {len(observations)}")
    world_scale = np.diag([1000.0, 1000.0, 1000.0, 1.0])
    rows = []
    for cam, uv in observations:
        w, h = cam.image_size
        T = np.array([[2.0 / w, 0.0, -1.0], [0.0, 2.0 / h, -1.0], [0.0, 0.0, 1.0]])
        P = T @ cam.projection_matrix() @ world_scale
        u, v, _ = T @ np.array([float(uv[0]), float(uv[1]), 1.0])
        rows.append(u * P[2] - P[0])
        rows.append(v * P[2] - P[1])
    A = np.stack(rows)
    _, s, Vt = np.linalg.svd(A)
    if s[-2] <= 1e-9 * s[0]:
        raise DegenerateConfiguration("design matrix is rank deficient (parallel or identical rays)")
    X = Vt[-1]
    if abs(X[3]) < 1e-12:
        raise DegenerateConfiguration("solution lies at infinity")
    return X[:3] / X[3] * 1000.0
