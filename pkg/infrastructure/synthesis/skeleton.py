"""
Forward-kinematics sampling of articulated skeletons placed in the workspace.
"""

import logging
import math
from typing import List, Optional, Union

import numpy as np
import torch
from scipy.spatial.transform import Rotation

from application.utils.seeding import numpy_rng
from domain.errors import WorkspaceTooCrowded
from domain.models.camera import Workspace
from domain.models.poses import Pose3DSet, SkeletonSpec

logger = logging.getLogger(__name__)

MIN_PERSON_SEPARATION_MM = 600.0
MAX_REJECTIONS = 1000

# Rest direction of each bone in a body frame facing +x (left = +y, up = +z) and its cone half-angle.
_REST_DIRECTIONS = {
    "neck": ((0.0, 0.0, 1.0), 15.0),
    "nose": ((0.3, 0.0, 1.0), 20.0),
    "l-shoulder": ((0.0, 1.0, -0.1), 10.0),
    "l-elbow": ((0.0, 0.2, -1.0), 45.0),
    "l-wrist": ((0.3, 0.0, -1.0), 60.0),
    "l-hip": ((0.0, 1.0, 0.0), 10.0),
    "l-knee": ((0.05, 0.0, -1.0), 25.0),
    "l-ankle": ((-0.05, 0.0, -1.0), 25.0),
}
_DEFAULT_REST = ((0.0, 0.0, 1.0), 30.0)


def _rest_direction(name: str):
    if name.startswith("r-"):
        (x, y, z), cone = _REST_DIRECTIONS.get("l-" + name[2:], _DEFAULT_REST)
        return np.array([x, -y, z]), cone
    d, cone = _REST_DIRECTIONS.get(name, _DEFAULT_REST)
    return np.array(d), cone


def sample_in_cone(axis: np.ndarray, half_angle_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector uniform on the spherical cap around axis"""
    axis = axis / np.linalg.norm(axis)
    cos_max = math.cos(math.radians(half_angle_deg))
    cos_t = rng.uniform(cos_max, 1.0)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    return cos_t * axis + sin_t * (math.cos(phi) * u + math.sin(phi) * v)


def sample_roots(
    n: int, workspace: Workspace, min_separation: float, rng: np.random.Generator, max_rejections: int = MAX_REJECTIONS
) -> np.ndarray:
    """n points uniform in the workspace with pairwise distance at least min_separation"""
    lower, upper = np.asarray(workspace.lower), np.asarray(workspace.upper)
    roots: List[np.ndarray] = []
    rejections = 0
    while len(roots) < n:
        p = rng.uniform(lower, upper)
        if all(np.linalg.norm(p - q) >= min_separation for q in roots):
            roots.append(p)
            continue
        rejections += 1
        if rejections >= max_rejections:
            raise WorkspaceTooCrowded(
                f"could not place {n} points {min_separation} mm apart after {max_rejections} rejections"
            )
    return np.array(roots).reshape(n, 3)


def sample_person(spec: SkeletonSpec, root: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One (J, 3) pose rooted at root with a random heading"""
    yaw = Rotation.from_euler("z", rng.uniform(0.0, 2.0 * math.pi))
    joints = np.zeros((spec.num_joints, 3))
    joints[spec.root_index] = root
    for j in spec.topological_order():
        parent = spec.parent[j]
        if parent < 0:
            continue
        rest, cone = _rest_direction(spec.joint_names[j])
        direction = yaw.apply(sample_in_cone(rest, cone, rng))
        lo, hi = spec.bone_length_range[j]
        joints[j] = joints[parent] + rng.uniform(lo, hi) * direction
    return joints


def sample_poses(
    spec: SkeletonSpec,
    n_persons: int,
    workspace: Workspace,
    seed: Union[int, np.random.Generator] = 0,
    min_separation: float = MIN_PERSON_SEPARATION_MM,
    dtype: torch.dtype = torch.float64,
) -> Pose3DSet:
    """Persons with roots uniform in the workspace, pairwise at least min_separation apart"""
    if n_persons < 1:
        raise ValueError(f"n_persons must be >= 1, got {n_persons}")
    rng = seed if isinstance(seed, np.random.Generator) else numpy_rng(seed, "poses")
    roots = sample_roots(n_persons, workspace, min_separation, rng)
    joints = np.stack([sample_person(spec, r, rng) for r in roots])
    return Pose3DSet(joints=torch.as_tensor(joints, dtype=dtype), person_ids=list(range(n_persons)))


def person_roots(poses: Pose3DSet, spec: Optional[SkeletonSpec] = None) -> np.ndarray:
    root = (spec or SkeletonSpec()).root_index
    return poses.joints[:, root].detach().cpu().numpy()
