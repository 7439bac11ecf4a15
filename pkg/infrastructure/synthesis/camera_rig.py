"""
Synthetic calibrated camera rigs arranged on a circle around the workspace.
"""

import logging
import math
from typing import List, Tuple

import numpy as np

from application.utils.seeding import numpy_rng
from domain.models.camera import CameraCalibration, Workspace

logger = logging.getLogger(__name__)

DEFAULT_RADIUS_MM = 5500.0
DEFAULT_HEIGHT_RANGE_MM = (2000.0, 2600.0)
DEFAULT_IMAGE_SIZE = (256, 256)
DEFAULT_FOV_DEG = 70.0
WORLD_UP = np.array([0.0, 0.0, 1.0])


def look_at(center: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """World-to-camera (R, t) for a camera at center looking at target, image y pointing down"""
    forward = target - center
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, WORLD_UP)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    return R, -R @ center


def make_camera_rig(
    n_views: int,
    workspace: Workspace,
    radius: float = DEFAULT_RADIUS_MM,
    height_range: Tuple[float, float] = DEFAULT_HEIGHT_RANGE_MM,
    seed: int = 0,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    fov_deg: float = DEFAULT_FOV_DEG,
) -> List[CameraCalibration]:
    """Cameras spread around a circle, all aimed at the workspace center.

    Azimuths are evenly spaced with a small jitter, heights uniform in
    height_range, and focal lengths within 5% of the value giving fov_deg.
    """
    if n_views < 2:
        raise ValueError(f"a rig needs at least 2 views, got {n_views}")
    rng = numpy_rng(seed, "rig")
    target = workspace.center
    W, H = image_size
    base_focal = W / (2.0 * math.tan(math.radians(fov_deg) / 2.0))
    cams = []
    for c in range(n_views):
        azimuth = 2.0 * math.pi * c / n_views + rng.uniform(-0.1, 0.1)
        height = rng.uniform(*height_range)
        center = np.array([target[0] + radius * math.cos(azimuth), target[1] + radius * math.sin(azimuth), height])
        R, t = look_at(center, target)
        f = base_focal * rng.uniform(0.95, 1.05)
        K = [[f, 0.0, W / 2.0], [0.0, f, H / 2.0], [0.0, 0.0, 1.0]]
        cams.append(CameraCalibration(id=c, K=K, R=R.tolist(), t=t.tolist(), image_size=(W, H)))
    logger.debug(f"Built a {n_views}-view rig at radius {radius} mm")
    return cams
