"""
Pseudo-label handling: soft / hard confidence filtering and the per-epoch
mode schedule.
"""

import torch

from domain.models.poses import SENTINEL_PX, Pose2DSet
from domain.models.training import PseudoLabelConfig, PseudoLabelMode


def filter_pseudo_labels(pseudo: Pose2DSet, mode: PseudoLabelMode, threshold: float = 0.7) -> Pose2DSet:
    """Soft mode returns the set unchanged; hard mode masks joints whose confidence is below threshold"""
    mode = PseudoLabelMode(mode)
    if mode == PseudoLabelMode.SOFT:
        return pseudo
    if mode != PseudoLabelMode.HARD:
        raise ValueError(f"filter mode must be soft or hard, got {mode.value}")
    keep = pseudo.visibility_mask & (pseudo.confidence >= threshold)
    return Pose2DSet(
        joints=torch.where(keep[..., None], pseudo.joints, torch.full_like(pseudo.joints, SENTINEL_PX)),
        confidence=torch.where(keep, pseudo.confidence, torch.zeros_like(pseudo.confidence)),
        visibility_mask=keep,
    )


def mode_for_epoch(config: PseudoLabelConfig, epoch: int, total_epochs: int) -> PseudoLabelMode:
    """Resolves soft_then_hard into the mode used in a given 0-based epoch"""
    if config.mode != PseudoLabelMode.SOFT_THEN_HARD:
        return config.mode
    return PseudoLabelMode.HARD if epoch >= total_epochs - config.hard_last_epochs else PseudoLabelMode.SOFT
