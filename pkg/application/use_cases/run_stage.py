"""
Use Case: Run one training stage, or all of them in order, with the stage
order enforced through the checkpoints already in the run directory.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository
from application.interfaces.report_repository import AbstractLossLog
from application.use_cases.pretrain_backbone import PretrainBackboneUseCase
from application.use_cases.train_pose_net import TrainPoseNetUseCase
from application.use_cases.train_root_net import TrainRootNetUseCase
from application.use_cases.training_loop import StageResult, load_parameters
from application.utils.seeding import derive_seed
from config import TrainConfig
from domain.errors import EmptyDataset, StageOrderViolation
from domain.models.scene import SyntheticRootSample, SyntheticScene
from domain.models.training import StageName
from infrastructure.networks.bundle import ModelBundle, build_model_bundle

logger = logging.getLogger(__name__)

ALL_STAGES = "all"


def stage_sequence(stage: Union[StageName, str]) -> List[StageName]:
    if stage == ALL_STAGES:
        return list(StageName)
    return [StageName(stage)]


def build_bundle_for(scene: SyntheticScene, config: TrainConfig) -> ModelBundle:
    """Fresh networks whose initialization depends only on the config seed"""
    return build_model_bundle(
        scene.skeleton,
        scene.workspace,
        model_config=config.model,
        grid_config=config.grid,
        hyper=config.hyper,
        seed=derive_seed(config.seed, "init"),
    )


@dataclass
class TrainingOutcome:
    bundle: ModelBundle
    results: List[StageResult] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return all(r.completed for r in self.results)


class RunStageUseCase:
    def __init__(
        self, checkpoint_repo: AbstractCheckpointRepository, loss_log: AbstractLossLog, show_progress: bool = False
    ):
        self.checkpoint_repo = checkpoint_repo
        self.loss_log = loss_log
        self.show_progress = show_progress

    def _require_prerequisite(self, stage: StageName, bundle: ModelBundle) -> None:
        prerequisite = stage.prerequisite
        if prerequisite is None:
            return
        path = self.checkpoint_repo.find(prerequisite)
        if path is None:
            raise StageOrderViolation(
                f"stage {stage.value} needs a completed {prerequisite.value} checkpoint, none found"
            )
        logger.info(f"Initializing {stage.value} from {path}")
        load_parameters(bundle, self.checkpoint_repo.load(path))

    def _run_one(
        self,
        stage: StageName,
        bundle: ModelBundle,
        scene: SyntheticScene,
        config: TrainConfig,
        root_samples: Optional[Sequence[SyntheticRootSample]],
        stop_after: Optional[int],
    ) -> StageResult:
        args = (self.checkpoint_repo, self.loss_log, self.show_progress)
        if stage == StageName.PRETRAIN:
            return PretrainBackboneUseCase(*args).execute(bundle, scene, config, stop_after=stop_after)
        if stage == StageName.ROOT:
            return TrainRootNetUseCase(*args).execute(bundle, scene, config, root_samples, stop_after=stop_after)
        return TrainPoseNetUseCase(*args).execute(stage, bundle, scene, config, stop_after=stop_after)

    def execute(
        self,
        stage: Union[StageName, str],
        scene: SyntheticScene,
        config: TrainConfig,
        root_samples: Optional[Sequence[SyntheticRootSample]] = None,
        stop_after: Optional[int] = None,
    ) -> TrainingOutcome:
        """Trains the requested stage(s).

        Args:
            stage: a StageName or "all".
            scene: training frames; restricted to config.num_views cameras.
            config: the full training configuration.
            root_samples: synthetic root dataset; generated in memory when None.
            stop_after: interrupt each stage after this many steps (its checkpoint stays resumable).
        """
        stages = stage_sequence(stage)
        logger.info(f"Executing RunStageUseCase for {', '.join(s.value for s in stages)} (seed {config.seed})")
        scene = scene.with_views(config.num_views)
        if not scene.frames:
            raise EmptyDataset("the training scene has no frames")

        bundle = build_bundle_for(scene, config)
        self._require_prerequisite(stages[0], bundle)
        outcome = TrainingOutcome(bundle=bundle)
        for s in stages:
            result = self._run_one(s, bundle, scene, config, root_samples, stop_after)
            outcome.results.append(result)
            if not result.completed:
                break
        return outcome
