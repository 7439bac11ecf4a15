"""
Use Case: Evaluate a trained (or oracle) model on a synthetic scene.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository
from application.interfaces.report_repository import AbstractReportRepository
from application.use_cases.estimate_poses import EstimatePosesUseCase, oracle_heatmaps
from application.use_cases.localize_roots import LocalizeRootsUseCase
from application.use_cases.training_loop import load_parameters
from domain.models.camera import AffineAugmentation
from domain.models.poses import Pose3DSet
from domain.models.report import EvalReport, FramePrediction, MatchCounts, RootMetrics
from domain.models.scene import SceneFrame, SyntheticScene
from domain.models.training import HyperParams
from domain.models.volumes import HeatmapSet, RootProposal
from domain.services.metrics import (
    FrameEval,
    average_precision,
    pcp,
    pr_curve,
    recall_at,
    summarize_matches,
)
from infrastructure.networks.bundle import ModelBundle, build_model_bundle

logger = logging.getLogger(__name__)

AP_THRESHOLDS_MM = (25.0, 50.0, 100.0, 150.0)
ROOT_AP_THRESHOLDS_MM = (50.0, 100.0)
RECALL_THRESHOLD_MM = 500.0
ORACLE_DETECTION_THRESHOLD = 0.7


def threshold_key(threshold: float) -> str:
    return f"{threshold:g}"


def oracle_bundle(scene: SyntheticScene, hyper: Optional[HyperParams] = None) -> ModelBundle:
    """root_net and pose_net_3d bypassed to identity, for exact-heatmap evaluation"""
    hyper = (hyper or HyperParams()).model_copy(update={"detection_threshold": ORACLE_DETECTION_THRESHOLD})
    bundle = build_model_bundle(scene.skeleton, scene.workspace, hyper=hyper)
    bundle.set_bypass(root=True, pose=True)
    return bundle


def bundle_from_checkpoint(repo: AbstractCheckpointRepository, path: Path) -> ModelBundle:
    state = repo.load(path)
    bundle = ModelBundle.from_architecture(state.architecture)
    load_parameters(bundle, state)
    logger.info(f"Loaded {state.stage.value} checkpoint from {path} (step {state.step})")
    return bundle


@dataclass
class FrameResult:
    frame_id: int
    poses: Pose3DSet
    proposals: List[RootProposal]


def infer_frame(frame: SceneFrame, scene: SyntheticScene, bundle: ModelBundle, oracle: bool = False) -> FrameResult:
    cams = scene.cams
    W, H = cams[0].image_size
    t0 = AffineAugmentation.identity((W / 2.0, H / 2.0))
    if oracle:
        heatmaps = oracle_heatmaps(frame.gt_poses, cams, t0, bundle.hyper.sigma_hm)
        heatmaps = HeatmapSet(data=heatmaps.data.to(torch.float32), source=heatmaps.source)
    else:
        heatmaps = HeatmapSet(data=bundle.heatmap_net_2d(frame.image_tensor()))
    proposals = LocalizeRootsUseCase(bundle).execute((heatmaps, heatmaps, heatmaps), cams, t0, t0).proposals
    if not proposals:
        logger.warning(f"Frame {frame.id}: no root proposals")
    poses = EstimatePosesUseCase(bundle).execute(proposals, heatmaps, cams)
    return FrameResult(frame_id=frame.id, poses=poses, proposals=proposals)


def root_frames(results: Sequence[FrameResult], scene: SyntheticScene) -> List[FrameEval]:
    """Proposals against ground-truth roots, each as a one-joint pose"""
    root = scene.skeleton.root_index
    frames = []
    for result, frame in zip(results, scene.frames):
        pred = np.array([p.position for p in result.proposals], dtype=np.float64).reshape(-1, 1, 3)
        gt = frame.gt_poses.joints[:, root : root + 1].detach().cpu().numpy()
        frames.append(FrameEval.build(pred, [p.score for p in result.proposals], gt, frame.gt_poses.person_ids))
    return frames


def build_report(
    results: Sequence[FrameResult], scene: SyntheticScene, meta: Optional[Dict[str, str]] = None
) -> EvalReport:
    frames = [
        FrameEval.build(r.poses, [p.score for p in r.proposals], f.gt_poses, f.gt_poses.person_ids)
        for r, f in zip(results, scene.frames)
    ]
    summary = summarize_matches(frames)
    roots = root_frames(results, scene)
    root_summary = summarize_matches(roots)
    return EvalReport(
        ap={threshold_key(t): average_precision(frames, t) for t in AP_THRESHOLDS_MM},
        recall_500=recall_at(frames, RECALL_THRESHOLD_MM),
        mpjpe_mm=summary.mean_mpjpe,
        pcp=pcp(frames, scene.skeleton.limb_pairs),
        counts=MatchCounts(matched=summary.matched, missed=summary.missed, false_positive=summary.false_positive),
        root=RootMetrics(
            ap_50=average_precision(roots, ROOT_AP_THRESHOLDS_MM[0]),
            ap_100=average_precision(roots, ROOT_AP_THRESHOLDS_MM[1]),
            mean_error_mm=root_summary.mean_mpjpe,
        ),
        pr_curves={threshold_key(t): pr_curve(frames, t) for t in AP_THRESHOLDS_MM},
        frames=[
            FramePrediction(
                id=r.frame_id,
                poses=r.poses.joints.detach().cpu().double().tolist(),
                scores=[p.score for p in r.proposals],
            )
            for r in results
        ],
        pair_errors_mm=summary.errors,
        meta=dict(meta or {}),
    )


def evaluate_scene(
    scene: SyntheticScene, bundle: ModelBundle, oracle: bool = False, show_progress: bool = False
) -> Tuple[EvalReport, List[FrameResult]]:
    bundle.eval()
    with torch.no_grad():
        results = [
            infer_frame(frame, scene, bundle, oracle)
            for frame in tqdm(scene.frames, desc="eval", disable=not show_progress)
        ]
    meta = {
        "mode": "oracle" if oracle else "model",
        "frames": str(len(scene.frames)),
        "views": str(len(scene.cams)),
        "fine_pitch_mm": f"{float(bundle.fine_grid.pitch.mean()):.3f}",
        "coarse_pitch_mm": f"{float(bundle.coarse_grid.pitch.mean()):.3f}",
    }
    return build_report(results, scene, meta), results


class EvaluateSceneUseCase:
    def __init__(
        self,
        checkpoint_repo: AbstractCheckpointRepository,
        report_repo: AbstractReportRepository,
        show_progress: bool = False,
    ):
        self.checkpoint_repo = checkpoint_repo
        self.report_repo = report_repo
        self.show_progress = show_progress

    def execute(
        self,
        scene: SyntheticScene,
        out: Path,
        checkpoint: Optional[Path] = None,
        oracle: bool = False,
        num_views: Optional[int] = None,
    ) -> EvalReport:
        """Evaluates either a checkpoint or the oracle pipeline and writes the report to out"""
        if (checkpoint is None) == (not oracle):
            raise ValueError("give exactly one of a checkpoint or the oracle mode")
        source = "oracle" if oracle else checkpoint
        logger.info(f"Executing EvaluateSceneUseCase ({source}) on {len(scene.frames)} frames")
        scene = scene.with_views(num_views)
        bundle = oracle_bundle(scene) if oracle else bundle_from_checkpoint(self.checkpoint_repo, checkpoint)
        report, _ = evaluate_scene(scene, bundle, oracle=oracle, show_progress=self.show_progress)
        if checkpoint is not None:
            report.meta["checkpoint"] = str(checkpoint)
        self.report_repo.save_report(report, out)
        logger.info(f"AP@50 {report.ap['50']:.3f}, Recall@500 {report.recall_500:.3f}, MPJPE {report.mpjpe_mm:.1f} mm")
        return report
