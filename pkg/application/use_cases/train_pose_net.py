"""
Use Case: End-to-end self-supervised pose training (the pose_l2 and pose_l1l2 stages).
"""

import logging
from contextlib import nullcontext
from typing import Optional

import numpy as np
import torch

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository
from application.interfaces.report_repository import AbstractLossLog
from application.use_cases.estimate_poses import (
    build_pose_loss_inputs,
    compute_pose_loss_components,
    estimate_bottleneck_poses,
)
from application.use_cases.localize_roots import localize_branch
from application.use_cases.training_loop import StageResult, StageTrainer, StepLosses
from application.utils.augmentation import augment_views, sample_augmentation_pair
from application.utils.pseudo_labels import filter_pseudo_labels, mode_for_epoch
from config import TrainConfig
from domain.errors import StageOrderViolation
from domain.models.scene import SyntheticScene
from domain.models.training import HyperParams, StageName
from domain.models.volumes import HeatmapSet, RootBranch
from domain.services.losses import total_pose_loss
from infrastructure.networks.bundle import ModelBundle

logger = logging.getLogger(__name__)

POSE_STAGES = (StageName.POSE_L2, StageName.POSE_L1L2)


def stage_hyper(stage: StageName, hyper: HyperParams) -> HyperParams:
    """pose_l2 trains on the heatmap and attention terms only"""
    if stage == StageName.POSE_L2:
        return hyper.model_copy(update={"lambda_": 0.0})
    return hyper


def trains_attention(stage: StageName, config: TrainConfig) -> bool:
    if not config.loss.l2_attention:
        return False
    return stage != StageName.POSE_L2 or config.loss.train_attention_in_l2_stage


class PoseStep:
    """One multi-view frame through both augmented branches"""

    def __init__(self, bundle: ModelBundle, scene: SyntheticScene, config: TrainConfig, stage: StageName):
        if stage not in POSE_STAGES:
            raise StageOrderViolation(f"{stage.value} is not a pose stage")
        self.bundle = bundle
        self.scene = scene
        self.config = config
        self.stage = stage
        self.hyper = stage_hyper(stage, bundle.hyper)
        self.use_attention = trains_attention(stage, config)
        self.epochs = config.stages.for_stage(stage).epochs

    def __call__(self, index: int, epoch: int, rng: np.random.Generator) -> Optional[StepLosses]:
        frame = self.scene.frames[index]
        cams = self.scene.cams
        bundle = self.bundle
        pair = sample_augmentation_pair(self.config.aug, rng, cams[0].image_size, len(cams))
        x1 = augment_views(frame.image_tensor(), pair.first)
        x2 = augment_views(frame.image_tensor(), pair.second)

        backbone = torch.no_grad() if self.config.train.freeze_backbone else nullcontext()
        with backbone:
            H1 = HeatmapSet(data=bundle.heatmap_net_2d(x1))
            H2 = HeatmapSet(data=bundle.heatmap_net_2d(x2))
        with torch.no_grad():
            _, proposals = localize_branch(HeatmapSet(data=H2.data.detach()), cams, bundle, pair.t2, RootBranch.G2)
        if not proposals:
            logger.warning(f"Frame {frame.id}: no root proposals, no pose loss this step")
            return None

        mode = mode_for_epoch(self.config.pseudo, epoch, self.epochs)
        pseudo = filter_pseudo_labels(frame.pseudo_2d, mode, self.config.pseudo.hard_threshold)
        if not bool(pseudo.visibility_mask.any()):
            logger.debug(f"Frame {frame.id}: every pseudo joint is masked under {mode.value} labels")
            return None

        bottleneck = estimate_bottleneck_poses(proposals, H1, H2, cams, pair.t1, pair.t2, bundle)
        inputs = build_pose_loss_inputs(
            bottleneck, pseudo, cams, pair.t1, pair.t2, self.hyper, cross_view=self.config.loss.cross_view
        )
        A1 = A2 = None
        if self.use_attention:
            A1, A2 = bundle.attn_net_2d(x1), bundle.attn_net_2d(x2)
        components, has_matches = compute_pose_loss_components(inputs, self.config.loss, A1, A2)
        if not has_matches:
            logger.debug(f"Frame {frame.id}: no predicted person matched a pseudo label")
        total = total_pose_loss(components, self.hyper)
        return StepLosses(
            total=total,
            heatmap=float(components.heatmap.detach()),
            joint=float(components.joint.detach()),
            attn=float(components.attn.detach()),
        )


class TrainPoseNetUseCase:
    def __init__(
        self, checkpoint_repo: AbstractCheckpointRepository, loss_log: AbstractLossLog, show_progress: bool = False
    ):
        self.checkpoint_repo = checkpoint_repo
        self.loss_log = loss_log
        self.show_progress = show_progress

    def execute(
        self,
        stage: StageName,
        bundle: ModelBundle,
        scene: SyntheticScene,
        config: TrainConfig,
        stop_after: Optional[int] = None,
    ) -> StageResult:
        logger.info(f"Executing TrainPoseNetUseCase for stage {stage.value} on {len(scene.frames)} frames")
        step = PoseStep(bundle, scene, config, stage)
        schedule = config.stages.for_stage(stage)
        trainer = StageTrainer(
            bundle,
            self.checkpoint_repo,
            self.loss_log,
            seed=config.seed,
            grad_clip=config.grad_clip,
            checkpoint_every=config.checkpoint_every,
            show_progress=self.show_progress,
        )
        parameters = bundle.stage_parameters(
            stage, train_attention=step.use_attention, freeze_backbone=config.train.freeze_backbone
        )
        return trainer.run(
            stage,
            n_items=len(scene.frames),
            epochs=schedule.epochs,
            lr=schedule.lr,
            milestones=schedule.lr_milestones,
            parameters=parameters,
            step_fn=step,
            stop_after=stop_after,
        )
