"""
Domain models for camera geometry: calibrations, image-space augmentations,
voxel grids and the capture workspace.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from domain.errors import CalibrationError, ShapeMismatch, SingularTransform

Vec3 = Tuple[float, float, float]


class CameraCalibration(BaseModel):
    """Intrinsics and extrinsics of one distortion-free pinhole view"""

    model_config = ConfigDict(frozen=True)

    id: int = Field(..., description="View index")
    K: List[List[float]] = Field(..., description="3x3 intrinsic matrix, pixels")
    R: List[List[float]] = Field(..., description="3x3 world-to-camera rotation")
    t: List[float] = Field(..., description="Translation, mm")
    image_size: Tuple[int, int] = Field(..., description="(width, height) in pixels")
    distortion: Optional[List[float]] = Field(None, description="Rejected unless absent or all zero")

    @model_validator(mode="after")
    def check_invariants(self) -> "CameraCalibration":
        K = np.asarray(self.K, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64)
        if K.shape != (3, 3) or R.shape != (3, 3) or t.shape != (3,):
            raise CalibrationError(f"camera {self.id}: expected K 3x3, R 3x3, t 3, got {K.shape}, {R.shape}, {t.shape}")
        if self.distortion and any(abs(d) > 0.0 for d in self.distortion):
            raise CalibrationError(f"camera {self.id}: lens distortion is not supported")
        if np.max(np.abs(R @ R.T - np.eye(3))) >= 1e-6 or abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise CalibrationError(f"camera {self.id}: R is not a proper rotation")
        if K[2, 2] != 1.0 or K[0, 0] <= 0 or K[1, 1] <= 0:
            raise CalibrationError(f"camera {self.id}: K must have K[2][2] = 1 and positive focal lengths")
        if self.image_size[0] <= 0 or self.image_size[1] <= 0:
            raise CalibrationError(f"camera {self.id}: image size must be positive")
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise CalibrationError(f"camera {self.id}: non-finite calibration entries")
        return self

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    @property
    def heatmap_size(self) -> Tuple[int, int]:
        """(Hq, Wq) of the quarter-resolution heatmaps for this view"""
        return self.height // 4, self.width // 4

    def projection_matrix(self) -> np.ndarray:
        """Full 3x4 matrix K [R | t]"""
        K = np.asarray(self.K, dtype=np.float64)
        Rt = np.concatenate([np.asarray(self.R, dtype=np.float64), np.asarray(self.t, dtype=np.float64)[:, None]], 1)
        return K @ Rt

    def center(self) -> np.ndarray:
        """Camera center in world coordinates, mm"""
        R = np.asarray(self.R, dtype=np.float64)
        return -R.T @ np.asarray(self.t, dtype=np.float64)

    def tensors(
        self, dtype: torch.dtype = torch.float64, device: Optional[torch.device] = None
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(K, R, t) as tensors"""
        return (
            torch.tensor(self.K, dtype=dtype, device=device),
            torch.tensor(self.R, dtype=dtype, device=device),
            torch.tensor(self.t, dtype=dtype, device=device),
        )


def _affine_matrix(rotation_deg: float, scale: float, pivot: Tuple[float, float]) -> np.ndarray:
    theta = math.radians(rotation_deg)
    f = 1.0 + scale
    c, s = math.cos(theta) * f, math.sin(theta) * f
    px, py = pivot
    # T(pivot) . Rot . Scale . T(-pivot)
    return np.array(
        [
            [c, -s, px - c * px + s * py],
            [s, c, py - s * px - c * py],
        ],
        dtype=np.float64,
    )


class AffineAugmentation(BaseModel):
    """Image-space rotation and scaling about a pivot, shared by all views of a branch"""

    model_config = ConfigDict(frozen=True)

    rotation_deg: float = Field(0.0, description="Rotation angle, degrees")
    scale: float = Field(0.0, description="Scale offset, applied as 1 + scale")
    pivot: Tuple[float, float] = Field((0.0, 0.0), description="Image center, pixels")

    @model_validator(mode="after")
    def check_invertible(self) -> "AffineAugmentation":
        if (1.0 + self.scale) ** 2 <= 1e-9:
            raise SingularTransform(f"scale offset {self.scale} collapses the image")
        return self

    @classmethod
    def identity(cls, pivot: Tuple[float, float] = (0.0, 0.0)) -> "AffineAugmentation":
        return cls(rotation_deg=0.0, scale=0.0, pivot=pivot)

    @property
    def matrix(self) -> np.ndarray:
        """2x3 affine matrix in pixels"""
        return _affine_matrix(self.rotation_deg, self.scale, self.pivot)

    @property
    def det(self) -> float:
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def is_identity(self) -> bool:
        return self.rotation_deg == 0.0 and self.scale == 0.0

    def matrix_tensor(self, dtype: torch.dtype = torch.float64, device: Optional[torch.device] = None) -> torch.Tensor:
        return torch.tensor(self.matrix, dtype=dtype, device=device)


class VoxelGridSpec(BaseModel):
    """Axis-aligned voxel grid centered in world space"""

    model_config = ConfigDict(frozen=True)

    center: Vec3 = Field(..., description="Grid center, mm")
    extent: Vec3 = Field(..., description="Physical size along x, y, z, mm")
    resolution: Tuple[int, int, int] = Field(..., description="(X, Y, Z) voxel counts")

    @model_validator(mode="after")
    def check_sizes(self) -> "VoxelGridSpec":
        if any(n < 2 for n in self.resolution):
            raise ShapeMismatch(f"grid resolution must be >= 2 on every axis, got {self.resolution}")
        if any(e <= 0 for e in self.extent):
            raise ShapeMismatch(f"grid extent must be positive, got {self.extent}")
        return self

    @property
    def pitch(self) -> np.ndarray:
        """Spacing between adjacent voxel centers along each axis, mm"""
        return np.asarray(self.extent, dtype=np.float64) / (np.asarray(self.resolution, dtype=np.float64) - 1.0)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64) - np.asarray(self.extent, dtype=np.float64) / 2.0

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64) + np.asarray(self.extent, dtype=np.float64) / 2.0

    @property
    def num_voxels(self) -> int:
        X, Y, Z = self.resolution
        return X * Y * Z

    def recentered(self, center) -> "VoxelGridSpec":
        """Same extent and resolution around a new center"""
        c = tuple(float(v) for v in np.asarray(center, dtype=np.float64).reshape(3))
        return VoxelGridSpec(center=c, extent=self.extent, resolution=self.resolution)

    def voxel_center(self, index: Tuple[int, int, int]) -> np.ndarray:
        return self.lower + np.asarray(index, dtype=np.float64) * self.pitch

    def contains(self, point, tol: float = 1e-6) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))


class Workspace(BaseModel):
    """Axis-aligned box in which person roots are placed"""

    model_config = ConfigDict(frozen=True)

    lower: Vec3 = Field((-2000.0, -2000.0, 800.0), description="Minimum corner, mm")
    upper: Vec3 = Field((2000.0, 2000.0, 1100.0), description="Maximum corner, mm")

    @model_validator(mode="after")
    def check_order(self) -> "Workspace":
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ShapeMismatch(f"workspace lower {self.lower} must be below upper {self.upper}")
        return self

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lower) + np.asarray(self.upper)) / 2.0

    @property
    def size(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=np.float64) - np.asarray(self.lower, dtype=np.float64)

    def contains(self, point, tol: float = 1e-6) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= np.asarray(self.lower) - tol) and np.all(p <= np.asarray(self.upper) + tol))
