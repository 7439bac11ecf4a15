"""
Use Case: Train root_net on synthetic root volumes plus the consistency of
real frames under two augmentations.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import torch

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository
from application.interfaces.report_repository import AbstractLossLog
from application.use_cases.generate_root_dataset import sigma_3d_mm
from application.use_cases.localize_roots import branch_heatmaps, root_feature_volume, root_volumes
from application.use_cases.training_loop import StageResult, StageTrainer, StepLosses
from application.utils.augmentation import sample_augmentation_pair
from application.utils.seeding import derive_seed
from config import TrainConfig
from domain.errors import ShapeMismatch
from domain.models.camera import AffineAugmentation
from domain.models.scene import SyntheticRootSample, SyntheticScene
from domain.models.training import RootInput, StageName
from domain.models.volumes import HeatmapSet, HeatmapSource
from domain.services.losses import root_consistency_loss, root_syn_loss
from infrastructure.networks.bundle import ModelBundle
from infrastructure.synthesis.root_dataset import generate_root_dataset

logger = logging.getLogger(__name__)


def synthetic_root_input(sample: SyntheticRootSample, num_views: int, bundle: ModelBundle) -> HeatmapSet:
    """Root heatmaps of the first num_views views, repeated over every joint channel for all_joints input"""
    data = sample.root_heatmaps.data[:num_views]
    if data.shape[0] != num_views:
        raise ShapeMismatch(f"root sample has {data.shape[0]} views, the scene has {num_views}")
    if bundle.model_config.root_input == RootInput.ALL_JOINTS:
        data = data[:, None].expand(-1, bundle.num_joints, -1, -1)
    else:
        data = data[:, None]
    return HeatmapSet(data=data, source=HeatmapSource.SYNTHETIC_ROOT)


def prepare_root_samples(
    scene: SyntheticScene, bundle: ModelBundle, config: TrainConfig, samples: Optional[Sequence[SyntheticRootSample]]
) -> List[SyntheticRootSample]:
    """Loaded samples checked against the model's coarse grid, or freshly generated ones"""
    if samples is not None:
        for sample in samples:
            if sample.grid != bundle.coarse_grid:
                raise ShapeMismatch(f"root sample grid {sample.grid} differs from the model grid {bundle.coarse_grid}")
        return list(samples)
    if config.root.samples == 0:
        return []
    logger.info(f"Generating {config.root.samples} synthetic root samples for the root stage")
    return generate_root_dataset(
        config.root.samples,
        scene.cams,
        scene.workspace,
        bundle.coarse_grid,
        config.root.max_roots,
        config.root.sigma_2d,
        sigma_3d_mm(bundle.coarse_grid, config.root.sigma_3d_voxels),
        seed=derive_seed(config.seed, "root-dataset"),
    )


class RootStep:
    """Synthetic root loss on one sample, plus the consistency loss on a real frame when enabled"""

    def __init__(
        self,
        bundle: ModelBundle,
        scene: SyntheticScene,
        config: TrainConfig,
        samples: Sequence[SyntheticRootSample],
    ):
        self.bundle = bundle
        self.scene = scene
        self.config = config
        self.samples = list(samples)
        W, H = scene.cams[0].image_size
        self.t0 = AffineAugmentation.identity((W / 2.0, H / 2.0))

    @property
    def n_items(self) -> int:
        return len(self.samples) if self.samples else len(self.scene.frames)

    @property
    def uses_consistency(self) -> bool:
        return self.config.root.consistency and bool(self.scene.frames)

    def synthetic_loss(self, sample: SyntheticRootSample) -> torch.Tensor:
        bundle = self.bundle
        H = synthetic_root_input(sample, len(self.scene.cams), bundle)
        F_root = root_feature_volume(H, self.scene.cams, bundle.coarse_grid, self.t0, 0, bundle.model_config.root_input)
        G = bundle.root_net(F_root)
        return root_syn_loss(G, sample.gt_root_volume.to(G.dtype))

    def consistency_loss(self, index: int, rng: np.random.Generator) -> torch.Tensor:
        frame = self.scene.frames[index % len(self.scene.frames)]
        cams = self.scene.cams
        pair = sample_augmentation_pair(self.config.aug, rng, cams[0].image_size, len(cams))
        with torch.no_grad():
            heatmaps = branch_heatmaps(frame.image_tensor(), pair.t1, pair.t2, self.bundle, pair)
        G0, G1, G2 = root_volumes(heatmaps, cams, pair.t1, pair.t2, self.bundle)
        return root_consistency_loss(G0.data, G1.data, G2.data)

    def __call__(self, index: int, epoch: int, rng: np.random.Generator) -> Optional[StepLosses]:
        terms = []
        if self.samples:
            terms.append(self.synthetic_loss(self.samples[index]))
        if self.uses_consistency:
            terms.append(self.consistency_loss(index, rng))
        if not terms:
            return None
        return StepLosses(total=torch.stack(terms).sum())


class TrainRootNetUseCase:
    def __init__(
        self, checkpoint_repo: AbstractCheckpointRepository, loss_log: AbstractLossLog, show_progress: bool = False
    ):
        self.checkpoint_repo = checkpoint_repo
        self.loss_log = loss_log
        self.show_progress = show_progress

    def execute(
        self,
        bundle: ModelBundle,
        scene: SyntheticScene,
        config: TrainConfig,
        samples: Optional[Sequence[SyntheticRootSample]] = None,
        stop_after: Optional[int] = None,
    ) -> StageResult:
        samples = prepare_root_samples(scene, bundle, config, samples)
        logger.info(
            f"Executing TrainRootNetUseCase with {len(samples)} synthetic samples, "
            f"consistency {'on' if config.root.consistency else 'off'}"
        )
        step = RootStep(bundle, scene, config, samples)
        schedule = config.stages.root
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
            StageName.ROOT,
            n_items=step.n_items,
            epochs=schedule.epochs,
            lr=schedule.lr,
            milestones=schedule.lr_milestones,
            parameters=bundle.stage_parameters(StageName.ROOT),
            step_fn=step,
            stop_after=stop_after,
        )
