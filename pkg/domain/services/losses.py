"""
Training objectives: synthetic root loss, root consistency loss, pose heatmap
and joint losses, their attentive variants, and the combined pose objective.

All L2 terms are means over elements.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Union

import torch

from domain.errors import ShapeMismatch, TooFewViews
from domain.models.poses import Pose2DSet
from domain.models.training import HyperParams
from domain.models.volumes import HeatmapSet
from domain.services.assignment import Assignment, match_poses_per_view

logger = logging.getLogger(__name__)

TensorLike = Union[torch.Tensor, HeatmapSet]


def _data(x: TensorLike) -> torch.Tensor:
    return x.data if isinstance(x, HeatmapSet) else x


def _mse(a: torch.Tensor, b: torch.Tensor, what: str) -> torch.Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")
    return ((a - b) ** 2).mean()


def heatmap_mse(H_pred: TensorLike, H_target: TensorLike) -> torch.Tensor:
    """Backbone pretraining loss against rendered pseudo-label targets"""
    return _mse(_data(H_pred), _data(H_target), "heatmap_mse")


def root_syn_loss(G_pred: torch.Tensor, G_target: torch.Tensor) -> torch.Tensor:
    """Mean squared error between predicted and target synthetic root volumes"""
    return _mse(G_pred, G_target, "root_syn_loss")


def root_consistency_loss(G0: torch.Tensor, G1: torch.Tensor, G2: torch.Tensor) -> torch.Tensor:
    """MSE(G0, G1) + MSE(G0, G2); G0 comes from the unaugmented views"""
    return _mse(G0, G1, "root_consistency_loss") + _mse(G0, G2, "root_consistency_loss")


def pose_heatmap_loss(
    H1_rend: TensorLike, H1_pseudo: TensorLike, H2_rend: TensorLike, H2_pseudo: TensorLike
) -> torch.Tensor:
    """Sum over the two augmented branches of the heatmap MSE"""
    return _mse(_data(H1_rend), _data(H1_pseudo), "pose_heatmap_loss") + _mse(
        _data(H2_rend), _data(H2_pseudo), "pose_heatmap_loss"
    )


def attentive_heatmap_loss(H_rend: TensorLike, H_pseudo: TensorLike, A: torch.Tensor) -> torch.Tensor:
    """Mean over all elements of A * (H - H*)^2 for one branch"""
    H, Hs = _data(H_rend), _data(H_pseudo)
    if H.shape != Hs.shape or A.shape != H.shape:
        raise ShapeMismatch(f"attentive loss shapes {tuple(H.shape)}, {tuple(Hs.shape)}, {tuple(A.shape)} differ")
    return (A * (H - Hs) ** 2).mean()


def attention_regularizer(A: torch.Tensor) -> torch.Tensor:
    """MSE between the attention maps and all-ones"""
    return ((A - 1.0) ** 2).mean()


def hard_view_attention_loss(per_view_l1: Union[torch.Tensor, Sequence[torch.Tensor]]) -> torch.Tensor:
    """Mean of the per-view losses after dropping the single worst view (lowest index on ties)"""
    if isinstance(per_view_l1, torch.Tensor):
        losses = per_view_l1
    else:
        losses = torch.stack([torch.as_tensor(v) for v in per_view_l1])
    K = losses.shape[0]
    if K < 2:
        raise TooFewViews(f"hard view attention needs at least 2 views, got {K}")
    worst = int(torch.argmax(losses.detach()))
    keep = torch.ones(K, dtype=torch.bool, device=losses.device)
    keep[worst] = False
    return losses[keep].mean()


class JointLoss(NamedTuple):
    value: torch.Tensor
    has_matches: bool


def match_views(y: Pose2DSet, y_pseudo: Pose2DSet) -> List[Assignment]:
    """Per-view Hungarian assignments of predicted to pseudo persons"""
    if y.num_views != y_pseudo.num_views:
        raise ShapeMismatch(f"{y.num_views} predicted views but {y_pseudo.num_views} pseudo views")
    out = []
    for c in range(y.num_views):
        present = y_pseudo.persons_present(c)
        pairs = match_poses_per_view(
            y.joints[c],
            y_pseudo.joints[c, present],
            y.visibility_mask[c],
            y_pseudo.visibility_mask[c, present],
        )
        out.append([(i, present[k]) for i, k in pairs])
    return out


def _per_view_l1(y: Pose2DSet, y_pseudo: Pose2DSet, assignments: Sequence[Assignment]):
    sums, counts = [], []
    zero = y.joints.new_zeros(())
    for c, pairs in enumerate(assignments):
        if not pairs:
            sums.append(zero)
            counts.append(0)
            continue
        pi = torch.tensor([p for p, _ in pairs], dtype=torch.long, device=y.joints.device)
        qi = torch.tensor([q for _, q in pairs], dtype=torch.long, device=y.joints.device)
        both = y.visibility_mask[c, pi] & y_pseudo.visibility_mask[c, qi]  # (M, J)
        diff = (y.joints[c, pi] - y_pseudo.joints[c, qi].to(y.joints.dtype)).abs()  # (M, J, 2)
        masked = torch.where(both[..., None], diff, torch.zeros_like(diff))
        sums.append(masked.sum())
        counts.append(int(both.sum()) * 2)
    return sums, counts


def joint_branch_loss(
    y: Pose2DSet,
    y_pseudo: Pose2DSet,
    assignments: Optional[Sequence[Assignment]] = None,
    hard_view_attention: bool = False,
) -> JointLoss:
    """L1 over matched, visible joint coordinates of one augmented branch"""
    if assignments is None:
        assignments = match_views(y, y_pseudo)
    sums, counts = _per_view_l1(y, y_pseudo, assignments)
    total_count = sum(counts)
    if total_count == 0:
        return JointLoss(y.joints.new_zeros(()), False)
    if hard_view_attention:
        per_view = [s / n for s, n in zip(sums, counts) if n > 0]
        try:
            return JointLoss(hard_view_attention_loss(torch.stack(per_view)), True)
        except TooFewViews:
            logger.debug("Only one view has matches; hard view attention falls back to the plain mean")
    return JointLoss(torch.stack(sums).sum() / total_count, True)


def pose_joint_loss(
    y1: Pose2DSet,
    y1_pseudo: Pose2DSet,
    y2: Pose2DSet,
    y2_pseudo: Pose2DSet,
    assignments1: Optional[Sequence[Assignment]] = None,
    assignments2: Optional[Sequence[Assignment]] = None,
    hard_view_attention: bool = False,
) -> JointLoss:
    """Sum of the two branch L1 losses; has_matches is False when neither branch matched anything"""
    a = joint_branch_loss(y1, y1_pseudo, assignments1, hard_view_attention)
    b = joint_branch_loss(y2, y2_pseudo, assignments2, hard_view_attention)
    return JointLoss(a.value + b.value, a.has_matches or b.has_matches)


@dataclass
class PoseLossComponents:
    heatmap: torch.Tensor
    joint: torch.Tensor
    attn: torch.Tensor


def total_pose_loss(components: PoseLossComponents, hyper: HyperParams) -> torch.Tensor:
    """heatmap + lambda * joint + sigma * attn"""
    return components.heatmap + hyper.lambda_ * components.joint + hyper.sigma_attn * components.attn
