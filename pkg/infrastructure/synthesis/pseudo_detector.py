"""
Simulated off-the-shelf 2D detector: exact projections corrupted by pixel
noise, in-image outliers and whole-person occlusion, with confidences that
separate clean from corrupted joints.
"""

import logging
from typing import Sequence, Union

import numpy as np
import torch

from application.utils.seeding import numpy_rng
from domain.models.camera import CameraCalibration
from domain.models.poses import Pose2DSet, Pose3DSet
from domain.models.scene import PseudoNoiseModel
from domain.services.geometry import MIN_DEPTH_MM, project_points

logger = logging.getLogger(__name__)


def simulate_pseudo_2d(
    poses: Pose3DSet,
    cams: Sequence[CameraCalibration],
    noise: PseudoNoiseModel,
    seed: Union[int, np.random.Generator] = 0,
) -> Pose2DSet:
    rng = seed if isinstance(seed, np.random.Generator) else numpy_rng(seed, "pseudo")
    C, P, J = len(cams), poses.num_persons, poses.num_joints
    gt = poses.joints.detach().to(torch.float64)

    uv = np.zeros((C, P, J, 2))
    in_front = np.zeros((C, P, J), dtype=bool)
    for c, cam in enumerate(cams):
        proj, depth = project_points(cam, gt)
        uv[c] = proj.numpy()
        in_front[c] = depth.numpy() > MIN_DEPTH_MM

    offset = rng.normal(0.0, noise.sigma_px, size=uv.shape) if noise.sigma_px > 0 else np.zeros_like(uv)
    pseudo = uv + offset
    err = np.linalg.norm(offset, axis=-1)
    confidence = np.maximum(
        noise.clean_confidence_floor, np.exp(-(err**2) / (2.0 * noise.confidence_scale_px**2))
    )

    outlier = rng.random((C, P, J)) < noise.p_outlier
    sizes = np.array([cam.image_size for cam in cams], dtype=np.float64)  # (C, 2) as (W, H)
    uniform = rng.random((C, P, J, 2)) * sizes[:, None, None, :]
    pseudo = np.where(outlier[..., None], uniform, pseudo)
    lo, hi = noise.outlier_confidence_range
    confidence = np.where(outlier, rng.uniform(lo, hi, size=(C, P, J)), confidence)

    dropped = rng.random((C, P)) < noise.p_drop
    valid = in_front & ~dropped[..., None]
    confidence = np.where(valid, confidence, 0.0)
    logger.debug(f"Pseudo 2D: {int(outlier.sum())} outlier joints, {int(dropped.sum())} dropped persons")

    out = Pose2DSet.from_joints(
        torch.as_tensor(pseudo),
        [cam.image_size for cam in cams],
        confidence=torch.as_tensor(confidence),
        valid=torch.as_tensor(valid),
    )
    # joints pushed out of the image carry no confidence
    return Pose2DSet(
        joints=out.joints,
        confidence=torch.where(out.visibility_mask, out.confidence, torch.zeros_like(out.confidence)),
        visibility_mask=out.visibility_mask,
    )
