"""
Minimal limb renderer producing the pixels the 2D networks are trained on.
"""

from typing import Optional, Sequence, Tuple, Union

import matplotlib
import numpy as np
import torch

from application.utils.seeding import numpy_rng
from domain.models.camera import CameraCalibration
from domain.models.poses import Pose3DSet, SkeletonSpec
from domain.services.geometry import MIN_DEPTH_MM, project_points

BACKGROUND_GRAY = 0.5
PIXEL_NOISE_STD = 0.02
LIMB_THICKNESS_PX = 5.0
JOINT_RADIUS_PX = 3.5


def person_color(index: int) -> np.ndarray:
    """Fixed RGB color of the index-th person"""
    return np.asarray(matplotlib.colormaps["tab10"](index % 10)[:3], dtype=np.float32)


def _segment_coverage(
    a: np.ndarray, b: np.ndarray, xs: np.ndarray, ys: np.ndarray, thickness: float
) -> np.ndarray:
    """Anti-aliased coverage in [0, 1] of a thick segment over a pixel grid"""
    ab = b - a
    denom = float(ab @ ab)
    px, py = xs - a[0], ys - a[1]
    if denom > 0:
        s = np.clip((px * ab[0] + py * ab[1]) / denom, 0.0, 1.0)
    else:
        s = np.zeros_like(px)
    dx, dy = px - s * ab[0], py - s * ab[1]
    dist = np.sqrt(dx * dx + dy * dy)
    return np.clip(thickness / 2.0 + 0.5 - dist, 0.0, 1.0)


def _paint(image: np.ndarray, a: np.ndarray, b: np.ndarray, color: np.ndarray, thickness: float) -> None:
    H, W = image.shape[:2]
    pad = thickness + 1.0
    x0, x1 = int(max(np.floor(min(a[0], b[0]) - pad), 0)), int(min(np.ceil(max(a[0], b[0]) + pad), W - 1))
    y0, y1 = int(max(np.floor(min(a[1], b[1]) - pad), 0)), int(min(np.ceil(max(a[1], b[1]) + pad), H - 1))
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    alpha = _segment_coverage(a, b, xs, ys, thickness)[..., None].astype(np.float32)
    patch = image[y0 : y1 + 1, x0 : x1 + 1]
    image[y0 : y1 + 1, x0 : x1 + 1] = patch * (1.0 - alpha) + color * alpha


def render_view(
    poses: Pose3DSet, cam: CameraCalibration, skeleton: SkeletonSpec, rng: np.random.Generator
) -> np.ndarray:
    W, H = cam.image_size
    image = np.full((H, W, 3), BACKGROUND_GRAY, dtype=np.float32)
    if poses.num_persons:
        uv, depth = project_points(cam, poses.joints.detach().to(torch.float64))
        uv, depth = uv.numpy(), depth.numpy()
        for p in range(poses.num_persons):
            color = person_color(p)
            for j, parent in enumerate(skeleton.parent):
                if parent < 0 or depth[p, j] <= MIN_DEPTH_MM or depth[p, parent] <= MIN_DEPTH_MM:
                    continue
                _paint(image, uv[p, parent], uv[p, j], color, LIMB_THICKNESS_PX)
            for j in range(skeleton.num_joints):
                if depth[p, j] > MIN_DEPTH_MM:
                    _paint(image, uv[p, j], uv[p, j], color, 2.0 * JOINT_RADIUS_PX)
    image += rng.normal(0.0, PIXEL_NOISE_STD, size=image.shape).astype(np.float32)
    return np.clip(image, 0.0, 1.0)


def render_scene_images(
    poses: Pose3DSet,
    cams: Sequence[CameraCalibration],
    image_size: Optional[Tuple[int, int]] = None,
    seed: Union[int, np.random.Generator] = 0,
    skeleton: Optional[SkeletonSpec] = None,
) -> np.ndarray:
    """(C, H, W, 3) float32 images in [0, 1]: colored limbs over a noisy gray background.

    image_size, when given, must agree with every camera's calibration.
    """
    skeleton = skeleton or SkeletonSpec()
    rng = seed if isinstance(seed, np.random.Generator) else numpy_rng(seed, "images")
    if image_size is not None:
        for cam in cams:
            if tuple(cam.image_size) != tuple(image_size):
                raise ValueError(f"camera {cam.id} has image size {cam.image_size}, expected {image_size}")
    return np.stack([render_view(poses, cam, skeleton, rng) for cam in cams])
