"""
Use Case: Pretrain heatmap_net_2d on pseudo 2D poses.
"""

import logging
from typing import Optional

import numpy as np
import torch

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository
from application.interfaces.report_repository import AbstractLossLog
from application.use_cases.estimate_poses import map_pseudo
from application.use_cases.training_loop import StageResult, StageTrainer, StepLosses
from application.utils.augmentation import augment_views, sample_augmentation_pair
from config import TrainConfig
from domain.models.scene import SyntheticScene
from domain.models.training import StageName
from domain.models.volumes import HeatmapSource
from domain.services.losses import heatmap_mse
from domain.services.rendering import render_pose_heatmaps
from infrastructure.networks.bundle import ModelBundle

logger = logging.getLogger(__name__)


class PretrainStep:
    """Supervised regression of one augmented frame onto confidence-weighted pseudo-label heatmaps"""

    def __init__(self, bundle: ModelBundle, scene: SyntheticScene, config: TrainConfig):
        self.bundle = bundle
        self.scene = scene
        self.config = config

    def __call__(self, index: int, epoch: int, rng: np.random.Generator) -> Optional[StepLosses]:
        frame = self.scene.frames[index]
        cams = self.scene.cams
        branch = sample_augmentation_pair(self.config.aug, rng, cams[0].image_size, len(cams)).first
        x = augment_views(frame.image_tensor(), branch)
        pseudo = map_pseudo(frame.pseudo_2d, branch.t, cams, dtype=torch.float32)
        target = render_pose_heatmaps(
            pseudo, cams[0].heatmap_size, self.config.hyper.sigma_hm, source=HeatmapSource.RENDERED_FROM_PSEUDO
        )
        loss = heatmap_mse(self.bundle.heatmap_net_2d(x), target)
        return StepLosses(total=loss, heatmap=float(loss.detach()))


class PretrainBackboneUseCase:
    def __init__(
        self, checkpoint_repo: AbstractCheckpointRepository, loss_log: AbstractLossLog, show_progress: bool = False
    ):
        self.checkpoint_repo = checkpoint_repo
        self.loss_log = loss_log
        self.show_progress = show_progress

    def execute(
        self, bundle: ModelBundle, scene: SyntheticScene, config: TrainConfig, stop_after: Optional[int] = None
    ) -> StageResult:
        logger.info(f"Executing PretrainBackboneUseCase on {len(scene.frames)} frames")
        schedule = config.stages.pretrain
        trainer = StageTrainer(
            bundle,
            self.checkpoint_repo,
            self.loss_log,
            seed=config.seed,
            grad_clip=config.grad_clip,
            checkpoint_every=config.checkpoint_every,
            show_progress=self.show_progress,
        )
        return trainer.run(
            StageName.PRETRAIN,
            n_items=len(scene.frames),
            epochs=schedule.epochs,
            lr=schedule.lr,
            milestones=schedule.lr_milestones,
            parameters=bundle.stage_parameters(StageName.PRETRAIN),
            step_fn=PretrainStep(bundle, scene, config),
            stop_after=stop_after,
        )
