"""
Differentiable encoding of 2D joints into Gaussian heatmaps and decoding of
3D score volumes into coordinates with soft-argmax.
"""

import math
from typing import Optional, Tuple

import torch

from domain.errors import InvalidBeta, InvalidSigma, ShapeMismatch
from domain.models.camera import VoxelGridSpec
from domain.models.poses import Pose2DSet
from domain.models.volumes import HeatmapSet, HeatmapSource
from domain.services.geometry import HEATMAP_STRIDE, voxel_centers

DEFAULT_SIGMA = 3.0
DEFAULT_BETA = 100.0
# Half-width of the square evaluation window, in sigmas. Dropped values are at most exp(-4.5).
WINDOW_SIGMAS = 3.0


def render_gaussian_heatmaps(
    joints: torch.Tensor,
    weights: torch.Tensor,
    resolution: Tuple[int, int],
    sigma: float,
    valid: Optional[torch.Tensor] = None,
    window: Optional[float] = WINDOW_SIGMAS,
) -> torch.Tensor:
    """Renders groups of weighted joints, combining each group by per-pixel maximum.

    Args:
        joints: (..., N, 2) heatmap-pixel coordinates (x, y), any float position.
        weights: (..., N) Gaussian amplitudes in [0, 1].
        resolution: (Hq, Wq).
        sigma: Gaussian width in heatmap pixels.
        valid: optional (..., N) bool; invalid joints contribute nothing.
        window: half-width of the evaluation window in sigmas, None for the exact Gaussian.

    Returns:
        (..., Hq, Wq) heatmaps.
    """
    if sigma <= 0:
        raise InvalidSigma(f"sigma must be positive, got {sigma}")
    if joints.shape[-1] != 2 or weights.shape != joints.shape[:-1]:
        raise ShapeMismatch(f"joints {tuple(joints.shape)} and weights {tuple(weights.shape)} disagree")
    Hq, Wq = resolution
    lead = joints.shape[:-2]
    if joints.shape[-2] == 0:
        return joints.new_zeros((*lead, Hq, Wq))
    amp = weights
    if valid is not None:
        amp = amp * valid.to(weights.dtype)
    if window is not None:
        return _render_windowed(joints, amp, Hq, Wq, sigma, window * sigma)
    xs = torch.arange(Wq, dtype=joints.dtype, device=joints.device)
    ys = torch.arange(Hq, dtype=joints.dtype, device=joints.device)
    dx = xs.view(1, Wq) - joints[..., 0, None, None]  # (..., N, 1, Wq)
    dy = ys.view(Hq, 1) - joints[..., 1, None, None]  # (..., N, Hq, 1)
    g = torch.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    g = g * amp[..., None, None]
    return g.amax(dim=-3)


def _axis_window(centers: torch.Tensor, size: int, sigma: float, reach: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """Gaussian factors (..., N, K) along one axis and their clamped pixel indices"""
    k = int(math.floor(2.0 * reach)) + 1
    start = torch.ceil(centers.detach() - reach)
    pixels = start[..., None] + torch.arange(k, dtype=centers.dtype, device=centers.device)
    d = pixels - centers[..., None]
    inside = (d.abs() <= reach) & (pixels >= 0) & (pixels < size)
    g = torch.exp(-d * d / (2.0 * sigma * sigma)) * inside.to(centers.dtype)
    return g, torch.nan_to_num(pixels, nan=0.0).clamp(0, size - 1).long()


def _render_windowed(
    joints: torch.Tensor, amp: torch.Tensor, Hq: int, Wq: int, sigma: float, reach: float
) -> torch.Tensor:
    """Each joint evaluated on its own square window, max-combined into the canvas"""
    gx, ix = _axis_window(joints[..., 0], Wq, sigma, reach)
    gy, iy = _axis_window(joints[..., 1], Hq, sigma, reach)
    patch = gy[..., :, None] * gx[..., None, :] * amp[..., None, None]  # (..., N, K, K)
    index = iy[..., :, None] * Wq + ix[..., None, :]
    lead = joints.shape[:-2]
    flat = patch.new_zeros((*lead, Hq * Wq))
    flat = flat.scatter_reduce(-1, index.reshape(*lead, -1), patch.reshape(*lead, -1), reduce="amax")
    return flat.reshape(*lead, Hq, Wq)


def render_gaussian_heatmap(
    joints: torch.Tensor,
    resolution: Tuple[int, int],
    sigma: float = DEFAULT_SIGMA,
    weights: Optional[torch.Tensor] = None,
    window: Optional[float] = WINDOW_SIGMAS,
) -> torch.Tensor:
    """Single-channel heatmap of N joints given as (N, 2) heatmap pixels"""
    joints = torch.as_tensor(joints, dtype=torch.float64) if not isinstance(joints, torch.Tensor) else joints
    joints = joints.reshape(-1, 2)
    if weights is None:
        weights = torch.ones(joints.shape[0], dtype=joints.dtype, device=joints.device)
    return render_gaussian_heatmaps(joints, weights, resolution, sigma, window=window)


def render_pose_heatmaps(
    y: Pose2DSet,
    resolution: Tuple[int, int],
    sigma: float = DEFAULT_SIGMA,
    source: HeatmapSource = HeatmapSource.RENDERED_FROM_PROJECTION,
    window: Optional[float] = WINDOW_SIGMAS,
) -> HeatmapSet:
    """Per-view, per-joint heatmaps of a 2D pose set given in augmented-image pixels"""
    joints = (y.joints / HEATMAP_STRIDE).permute(0, 2, 1, 3)  # (C, J, P, 2)
    weights = y.confidence.permute(0, 2, 1).to(joints.dtype)
    valid = y.visibility_mask.permute(0, 2, 1)
    data = render_gaussian_heatmaps(joints, weights, resolution, sigma, valid=valid, window=window)
    return HeatmapSet(data=data, source=source)


def soft_argmax_3d(volume: torch.Tensor, grid: VoxelGridSpec, beta: float = DEFAULT_BETA) -> torch.Tensor:
    """Expected voxel center under softmax(beta * volume); (..., X, Y, Z) -> (..., 3)"""
    if beta <= 0:
        raise InvalidBeta(f"beta must be positive, got {beta}")
    if tuple(volume.shape[-3:]) != tuple(grid.resolution):
        raise ShapeMismatch(f"volume {tuple(volume.shape)} does not match grid {grid.resolution}")
    centers = voxel_centers(grid, dtype=volume.dtype, device=volume.device).reshape(-1, 3)
    lead = volume.shape[:-3]
    probs = torch.softmax(beta * volume.reshape(*lead, -1), dim=-1)
    return probs @ centers


def decode_volume_poses(joint_volumes: torch.Tensor, grid: VoxelGridSpec, beta: float = DEFAULT_BETA) -> torch.Tensor:
    """Per-joint soft-argmax of (J, X, Y, Z) volumes into a (J, 3) pose"""
    if joint_volumes.ndim != 4:
        raise ShapeMismatch(f"joint volumes must be (J, X, Y, Z), got {tuple(joint_volumes.shape)}")
    return soft_argmax_3d(joint_volumes, grid, beta)
