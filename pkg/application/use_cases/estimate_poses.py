"""
Use Case: Estimate 3D poses around root proposals and assemble the
self-supervised pose loss inputs.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch

from domain.models.camera import AffineAugmentation, CameraCalibration, VoxelGridSpec
from domain.models.poses import SENTINEL_PX, Pose2DSet, Pose3DSet
from domain.models.training import HyperParams, LossConfig
from domain.models.volumes import BottleneckPoses, FeatureVolume, HeatmapSet, HeatmapSource, RootProposal
from domain.services.assignment import Assignment
from domain.services.geometry import MIN_DEPTH_MM, apply_affine, project_points, unproject_heatmaps
from domain.services.losses import (
    PoseLossComponents,
    attention_regularizer,
    attentive_heatmap_loss,
    match_views,
    pose_heatmap_loss,
    pose_joint_loss,
)
from domain.services.rendering import decode_volume_poses, render_pose_heatmaps
from infrastructure.networks.bundle import ModelBundle

logger = logging.getLogger(__name__)

PSEUDO = HeatmapSource.RENDERED_FROM_PSEUDO


def person_feature_volume(
    proposal: RootProposal,
    H: HeatmapSet,
    cams: Sequence[CameraCalibration],
    t: AffineAugmentation,
    fine_grid_template: VoxelGridSpec,
) -> FeatureVolume:
    """All-joint features on the fine grid recentered at the proposal"""
    return unproject_heatmaps(H, cams, fine_grid_template.recentered(proposal.position), t)


def _estimate_branch(
    proposals: Sequence[RootProposal],
    H: HeatmapSet,
    cams: Sequence[CameraCalibration],
    t: AffineAugmentation,
    bundle: ModelBundle,
) -> Pose3DSet:
    dtype = H.data.dtype
    if not proposals:
        return Pose3DSet.empty(bundle.num_joints, dtype=dtype)
    poses = []
    for proposal in proposals:
        F = person_feature_volume(proposal, H, cams, t, bundle.fine_grid)
        volumes = bundle.pose_net_3d(F.data.to(next(bundle.pose_net_3d.parameters()).dtype))
        poses.append(decode_volume_poses(volumes, F.grid, bundle.hyper.beta))
    return Pose3DSet(joints=torch.stack(poses), person_ids=list(range(len(proposals))))


def estimate_bottleneck_poses(
    proposals: Sequence[RootProposal],
    H1: HeatmapSet,
    H2: HeatmapSet,
    cams: Sequence[CameraCalibration],
    t1: AffineAugmentation,
    t2: AffineAugmentation,
    bundle: ModelBundle,
) -> BottleneckPoses:
    """One world-space pose per proposal under each augmented branch"""
    if not proposals:
        logger.debug("No proposals; bottleneck poses are empty")
    return BottleneckPoses(
        Y1=_estimate_branch(proposals, H1, cams, t1, bundle),
        Y2=_estimate_branch(proposals, H2, cams, t2, bundle),
        proposals=list(proposals),
    )


def estimate_poses(
    proposals: Sequence[RootProposal], H: HeatmapSet, cams: Sequence[CameraCalibration], bundle: ModelBundle
) -> Pose3DSet:
    """Poses of unaugmented views (inference)"""
    W, Hh = cams[0].image_size
    return _estimate_branch(proposals, H, cams, AffineAugmentation.identity((W / 2.0, Hh / 2.0)), bundle)


def _inside(uv: torch.Tensor, cams: Sequence[CameraCalibration]) -> torch.Tensor:
    sizes = torch.tensor([cam.image_size for cam in cams], dtype=uv.dtype, device=uv.device)
    wh = sizes.view(-1, *([1] * (uv.ndim - 2)), 2)
    return ((uv >= 0) & (uv < wh)).all(dim=-1)


def cross_view_project(
    Y_from: Pose3DSet,
    cams: Sequence[CameraCalibration],
    t_to: AffineAugmentation,
    require_source_visible: bool = False,
) -> Pose2DSet:
    """Projects world poses into every view's augmented image space.

    A joint is visible when it is in front of the camera and lands inside the
    augmented image. With require_source_visible it must also project inside
    the original image, as build_pose_loss_inputs asks.
    Invisible joints carry the sentinel coordinates.
    """
    X = Y_from.joints
    uv_list, front_list = [], []
    for cam in cams:
        uv, depth = project_points(cam, X)
        uv_list.append(uv)
        front_list.append(depth > MIN_DEPTH_MM)
    uv = torch.stack(uv_list)  # (C, P, J, 2)
    aug = apply_affine(t_to, uv)
    visible = torch.stack(front_list) & _inside(aug, cams)
    if require_source_visible:
        visible = visible & _inside(uv, cams)
    joints = torch.where(visible[..., None], aug, torch.full_like(aug, SENTINEL_PX))
    return Pose2DSet(joints=joints, confidence=torch.ones_like(joints[..., 0]), visibility_mask=visible)


def map_pseudo(
    pseudo: Pose2DSet,
    t: AffineAugmentation,
    cams: Sequence[CameraCalibration],
    dtype: torch.dtype = torch.float64,
) -> Pose2DSet:
    """Pseudo joints moved into an augmented image space; joints leaving the image are masked"""
    aug = apply_affine(t, pseudo.joints.to(dtype))
    visible = pseudo.visibility_mask & _inside(aug, cams)
    return Pose2DSet(
        joints=torch.where(visible[..., None], aug, torch.full_like(aug, SENTINEL_PX)),
        confidence=torch.where(visible, pseudo.confidence.to(dtype), torch.zeros_like(aug[..., 0])),
        visibility_mask=visible,
    )


def oracle_heatmaps(
    gt: Pose3DSet, cams: Sequence[CameraCalibration], t: AffineAugmentation, sigma: float
) -> HeatmapSet:
    """Exact heatmaps of ground-truth poses rendered in the augmented image space"""
    y = cross_view_project(gt, cams, t)
    return render_pose_heatmaps(y, cams[0].heatmap_size, sigma, source=HeatmapSource.RENDERED_FROM_PROJECTION)


@dataclass
class PoseLossInputs:
    y1: Pose2DSet
    y2: Pose2DSet
    y1_pseudo: Pose2DSet
    y2_pseudo: Pose2DSet
    H1: HeatmapSet
    H2: HeatmapSet
    H1_pseudo: HeatmapSet
    H2_pseudo: HeatmapSet
    assignments1: List[Assignment] = field(default_factory=list)
    assignments2: List[Assignment] = field(default_factory=list)
    is_empty: bool = False


def build_pose_loss_inputs(
    bottleneck: BottleneckPoses,
    pseudo_2d: Pose2DSet,
    cams: Sequence[CameraCalibration],
    t1: AffineAugmentation,
    t2: AffineAugmentation,
    hyper: HyperParams,
    cross_view: bool = True,
) -> PoseLossInputs:
    """Predicted and pseudo 2D joints and heatmaps of both branches, with per-view assignments.

    With cross_view, Y2 is compared in the first branch's image space and Y1
    in the second's; otherwise each branch stays in its own space.
    """
    resolution = cams[0].heatmap_size
    src1, src2 = (bottleneck.Y2, bottleneck.Y1) if cross_view else (bottleneck.Y1, bottleneck.Y2)
    y1 = cross_view_project(src1, cams, t1, require_source_visible=True)
    y2 = cross_view_project(src2, cams, t2, require_source_visible=True)
    y1_pseudo = map_pseudo(pseudo_2d, t1, cams, dtype=y1.joints.dtype)
    y2_pseudo = map_pseudo(pseudo_2d, t2, cams, dtype=y2.joints.dtype)
    sigma = hyper.sigma_hm
    return PoseLossInputs(
        y1=y1,
        y2=y2,
        y1_pseudo=y1_pseudo,
        y2_pseudo=y2_pseudo,
        H1=render_pose_heatmaps(y1, resolution, sigma),
        H2=render_pose_heatmaps(y2, resolution, sigma),
        H1_pseudo=render_pose_heatmaps(y1_pseudo, resolution, sigma, source=PSEUDO),
        H2_pseudo=render_pose_heatmaps(y2_pseudo, resolution, sigma, source=PSEUDO),
        assignments1=match_views(y1, y1_pseudo),
        assignments2=match_views(y2, y2_pseudo),
        is_empty=bottleneck.is_empty,
    )


def compute_pose_loss_components(
    inputs: PoseLossInputs,
    loss_config: LossConfig,
    A1: Optional[torch.Tensor] = None,
    A2: Optional[torch.Tensor] = None,
) -> Tuple[PoseLossComponents, bool]:
    """Heatmap, joint and attention terms; the flag tells whether any joint was matched.

    Attention maps are used when l2_attention is on and both maps are given.
    """
    if loss_config.l2_attention and A1 is not None and A2 is not None:
        dtype = inputs.H1.data.dtype
        heatmap = attentive_heatmap_loss(inputs.H1, inputs.H1_pseudo, A1.to(dtype))
        heatmap = heatmap + attentive_heatmap_loss(inputs.H2, inputs.H2_pseudo, A2.to(dtype))
        attn = attention_regularizer(A1) + attention_regularizer(A2)
    else:
        heatmap = pose_heatmap_loss(inputs.H1, inputs.H1_pseudo, inputs.H2, inputs.H2_pseudo)
        attn = heatmap.new_zeros(())
    joint = pose_joint_loss(
        inputs.y1,
        inputs.y1_pseudo,
        inputs.y2,
        inputs.y2_pseudo,
        inputs.assignments1,
        inputs.assignments2,
        hard_view_attention=loss_config.l1_attention,
    )
    components = PoseLossComponents(heatmap=heatmap, joint=joint.value.to(heatmap.dtype), attn=attn.to(heatmap.dtype))
    return components, joint.has_matches


class EstimatePosesUseCase:
    """Inference: proposals to 3D poses for one multi-view frame"""

    def __init__(self, bundle: ModelBundle):
        self.bundle = bundle

    def execute(
        self, proposals: Sequence[RootProposal], H: HeatmapSet, cams: Sequence[CameraCalibration]
    ) -> Pose3DSet:
        logger.debug(f"Executing EstimatePosesUseCase for {len(proposals)} proposals")
        self.bundle.eval()
        with torch.no_grad():
            return estimate_poses(proposals, H, cams, self.bundle)
