"""
Use Case: Sweep one TrainConfig key over a list of values, training the pose
stages from a shared root-stage checkpoint and evaluating each run.
"""

import logging
import re
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository
from application.interfaces.report_repository import AbstractLossLog, AbstractReportRepository
from application.use_cases.evaluate_scene import evaluate_scene
from application.use_cases.run_stage import RunStageUseCase
from config import TrainConfig
from domain.errors import StageOrderViolation
from domain.models.report import AblationResult, AblationRow
from domain.models.scene import SyntheticScene
from domain.models.training import StageName

logger = logging.getLogger(__name__)

ABLATION_FILE = "ablation.json"
LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0)
SIGMA_ATTN_GRID = (0.01, 0.1, 1.0)
DEFAULT_GRIDS = {"hyper.lambda": LAMBDA_GRID, "hyper.sigma_attn": SIGMA_ATTN_GRID}

CheckpointRepoFactory = Callable[[Path], AbstractCheckpointRepository]
LossLogFactory = Callable[[Path], AbstractLossLog]


def run_dir_name(param: str, value: Any) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]", "_", f"{param}={value}")


class RunAblationUseCase:
    def __init__(
        self,
        report_repo: AbstractReportRepository,
        checkpoint_repo_factory: CheckpointRepoFactory,
        loss_log_factory: LossLogFactory,
        show_progress: bool = False,
    ):
        self.report_repo = report_repo
        self.checkpoint_repo_factory = checkpoint_repo_factory
        self.loss_log_factory = loss_log_factory
        self.show_progress = show_progress

    def _stage(self, run_dir: Path) -> RunStageUseCase:
        return RunStageUseCase(
            self.checkpoint_repo_factory(run_dir), self.loss_log_factory(run_dir), show_progress=self.show_progress
        )

    def _base_checkpoint(self, config: TrainConfig, scene: SyntheticScene, out_dir: Path) -> Path:
        """Trains pretrain and root once; every swept value starts from the result"""
        base = out_dir / "base"
        runner = self._stage(base)
        for stage in (StageName.PRETRAIN, StageName.ROOT):
            runner.execute(stage, scene, config)
        path = self.checkpoint_repo_factory(base).find(StageName.ROOT)
        if path is None:
            raise StageOrderViolation(f"base run in {base} did not complete the root stage")
        return path

    def execute(
        self,
        config_path: Optional[Path],
        scene: SyntheticScene,
        eval_scene: SyntheticScene,
        param: str,
        values: Sequence[Any],
        out_dir: Path,
        init: Optional[Path] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> AblationResult:
        """Trains pose_l2 and pose_l1l2 once per value and writes ablation.json to out_dir.

        Args:
            config_path: base TrainConfig file, or None for the defaults.
            scene: training frames.
            eval_scene: held-out frames for the reports.
            param: dotted TrainConfig key, e.g. "hyper.lambda".
            values: parsed values to sweep.
            out_dir: one run directory per value plus the ablation file.
            init: a completed root-stage checkpoint; trained here from scratch when None.
            overrides: extra dotted keys applied before the swept one.
        """
        out_dir = Path(out_dir)
        logger.info(f"Executing RunAblationUseCase over {param} = {list(values)}")
        base_overrides = dict(overrides or {})
        base_config = TrainConfig.from_file(config_path, base_overrides)
        if init is None:
            init = self._base_checkpoint(base_config, scene, out_dir)
        state = self.checkpoint_repo_factory(Path(init).parent).load(Path(init))
        if state.stage != StageName.ROOT or not state.completed:
            raise StageOrderViolation(f"{init} is not a completed root-stage checkpoint")

        result = AblationResult(param=param)
        for value in values:
            config = TrainConfig.from_file(config_path, {**base_overrides, param: value})
            run_dir = out_dir / run_dir_name(param, value)
            self.checkpoint_repo_factory(run_dir).save(state)
            runner = self._stage(run_dir)
            runner.execute(StageName.POSE_L2, scene, config)
            outcome = runner.execute(StageName.POSE_L1L2, scene, config)
            report, _ = evaluate_scene(
                eval_scene.with_views(config.num_views), outcome.bundle, show_progress=self.show_progress
            )
            report.meta.update({"param": param, "value": str(value), "run_dir": str(run_dir)})
            logger.info(f"{param} = {value}: AP@50 {report.ap['50']:.3f}, MPJPE {report.mpjpe_mm:.1f} mm")
            result.rows.append(AblationRow(value=value, report=report))
        self.report_repo.save_ablation(result, out_dir / ABLATION_FILE)
        return result
