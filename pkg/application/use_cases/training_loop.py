"""
The stage loop shared by every training stage: per-epoch shuffling, per-step
random streams, Adam with a step-decay ladder, gradient clipping, loss
logging, divergence detection and resumable checkpoints.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch
from torch.nn.utils import clip_grad_norm_
from torch.optim import Adam
from torch.optim.lr_scheduler import MultiStepLR
from tqdm import tqdm

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository, CheckpointState
from application.interfaces.report_repository import AbstractLossLog, LossRecord
from application.utils.seeding import numpy_rng
from domain.errors import DivergenceDetected, EmptyDataset, FormatError
from domain.models.training import StageName
from infrastructure.networks.bundle import ModelBundle

logger = logging.getLogger(__name__)

LR_DECAY = 0.1


@dataclass
class StepLosses:
    total: torch.Tensor
    heatmap: float = 0.0
    joint: float = 0.0
    attn: float = 0.0


# (item index, 0-based epoch, per-step rng) -> losses, or None when the item contributes nothing
StepFn = Callable[[int, int, np.random.Generator], Optional[StepLosses]]


@dataclass
class StageResult:
    stage: StageName
    steps: int
    completed: bool
    checkpoint: Optional[Path] = None
    records: List[LossRecord] = field(default_factory=list)
    skipped_steps: int = 0
    resumed_from: int = 0


def load_parameters(bundle: ModelBundle, state: CheckpointState) -> None:
    try:
        bundle.load_state_dict(state.parameters)
    except RuntimeError as e:
        raise FormatError(f"checkpoint of stage {state.stage.value} does not fit this model: {e}") from e


class StageTrainer:
    """Runs one stage over a fixed number of items per epoch"""

    def __init__(
        self,
        bundle: ModelBundle,
        checkpoints: AbstractCheckpointRepository,
        loss_log: AbstractLossLog,
        seed: int = 0,
        grad_clip: float = 1.0,
        checkpoint_every: int = 50,
        show_progress: bool = False,
    ):
        self.bundle = bundle
        self.checkpoints = checkpoints
        self.loss_log = loss_log
        self.seed = seed
        self.grad_clip = grad_clip
        self.checkpoint_every = checkpoint_every
        self.show_progress = show_progress

    def _save(
        self,
        stage: StageName,
        step: int,
        epoch: int,
        completed: bool,
        optimizer: torch.optim.Optimizer,
        scheduler: MultiStepLR,
    ) -> Path:
        state = CheckpointState(
            architecture=self.bundle.architecture(),
            stage=stage,
            step=step,
            epoch=epoch,
            completed=completed,
            parameters={k: v.detach().clone() for k, v in self.bundle.state_dict().items()},
            optimizer=optimizer.state_dict(),
            scheduler=scheduler.state_dict(),
        )
        return self.checkpoints.save(state)

    def run(
        self,
        stage: StageName,
        n_items: int,
        epochs: int,
        lr: float,
        milestones: Sequence[int],
        parameters: List[torch.nn.Parameter],
        step_fn: StepFn,
        stop_after: Optional[int] = None,
    ) -> StageResult:
        """Trains a stage from scratch or from its interrupted checkpoint.

        Args:
            stop_after: step count at which to checkpoint and return early.
        """
        if n_items <= 0:
            raise EmptyDataset(f"stage {stage.value} has nothing to train on")
        if not parameters:
            raise EmptyDataset(f"stage {stage.value} has no trainable parameters")

        optimizer = Adam(parameters, lr=lr)
        scheduler = MultiStepLR(optimizer, milestones=list(milestones), gamma=LR_DECAY)
        total = epochs * n_items
        start = 0

        existing = self.checkpoints.find(stage, completed_only=False)
        if existing is not None:
            state = self.checkpoints.load(existing)
            load_parameters(self.bundle, state)
            if state.completed:
                logger.info(f"Stage {stage.value} already completed at {existing}; skipping")
                return StageResult(stage=stage, steps=state.step, completed=True, checkpoint=existing)
            if state.optimizer is not None:
                optimizer.load_state_dict(state.optimizer)
            start = state.step
            if state.scheduler is not None:
                scheduler.load_state_dict(state.scheduler)
            else:
                scheduler.last_epoch = start // n_items
            self.loss_log.truncate_after(stage.value, start)
            logger.info(f"Resuming stage {stage.value} at step {start}/{total}")

        result = StageResult(stage=stage, steps=start, completed=False, resumed_from=start)
        self.bundle.train()
        perm: Optional[np.ndarray] = None
        progress = tqdm(range(start, total), desc=stage.value, disable=not self.show_progress)
        for k in progress:
            epoch, pos = divmod(k, n_items)
            if perm is None or pos == 0:
                perm = numpy_rng(self.seed, stage.value, "epoch", epoch).permutation(n_items)
            rng = numpy_rng(self.seed, stage.value, "step", k)

            optimizer.zero_grad(set_to_none=True)
            losses = step_fn(int(perm[pos]), epoch, rng)
            if losses is None:
                result.skipped_steps += 1
            else:
                value = float(losses.total.detach())
                if not np.isfinite(value):
                    raise DivergenceDetected(f"stage {stage.value} loss became {value} at step {k + 1}")
                losses.total.backward()
                clip_grad_norm_(parameters, self.grad_clip)
                optimizer.step()
                record = LossRecord(
                    step=k + 1,
                    stage=stage.value,
                    loss_total=value,
                    loss_H=losses.heatmap,
                    loss_J=losses.joint,
                    loss_attn=losses.attn,
                )
                self.loss_log.append(record)
                result.records.append(record)
                progress.set_postfix(loss=f"{value:.4g}")
                logger.debug(f"{stage.value} step {k + 1}: loss {value:.6g}")
            if pos == n_items - 1:
                scheduler.step()

            result.steps = k + 1
            if stop_after is not None and k + 1 >= stop_after:
                result.checkpoint = self._save(stage, k + 1, (k + 1) // n_items, False, optimizer, scheduler)
                logger.info(f"Stopped stage {stage.value} at step {k + 1}/{total}")
                return result
            if (k + 1) % self.checkpoint_every == 0 and k + 1 < total:
                self._save(stage, k + 1, (k + 1) // n_items, False, optimizer, scheduler)

        if result.skipped_steps:
            logger.warning(f"Stage {stage.value}: {result.skipped_steps} steps contributed no loss")
        result.checkpoint = self._save(stage, total, epochs, True, optimizer, scheduler)
        result.completed = True
        result.steps = total
        logger.info(f"Finished stage {stage.value} after {total} steps")
        return result
