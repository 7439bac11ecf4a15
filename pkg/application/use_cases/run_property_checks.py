"""
Use Case: Run the built-in property suites (gradients, oracles, invariants)
and report which checks pass.
"""

import logging
import time
from enum import Enum
from itertools import permutations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field

from application.use_cases.estimate_poses import (
    build_pose_loss_inputs,
    compute_pose_loss_components,
    cross_view_project,
    map_pseudo,
)
from application.use_cases.evaluate_scene import AP_THRESHOLDS_MM, evaluate_scene, oracle_bundle
from application.use_cases.generate_scene import generate_frame, generate_scene
from application.utils.augmentation import sample_augmentation_pair
from application.utils.finite_differences import gradient_relative_error
from application.utils.seeding import derive_seed, numpy_rng
from domain.models.camera import AffineAugmentation, VoxelGridSpec, Workspace
from domain.models.poses import Pose2DSet, Pose3DSet, SkeletonSpec
from domain.models.scene import NoisePreset, PseudoNoiseModel
from domain.models.training import AugmentationConfig, GridConfig, HyperParams, LossConfig
from domain.models.volumes import BottleneckPoses, HeatmapSet, RootProposal
from domain.services.assignment import hungarian
from domain.services.geometry import apply_affine, invert_affine, project_point, triangulate_dlt, unproject_heatmaps
from domain.services.losses import (
    attention_regularizer,
    attentive_heatmap_loss,
    hard_view_attention_loss,
    joint_branch_loss,
    match_views,
    pose_heatmap_loss,
    root_consistency_loss,
    root_syn_loss,
)
from domain.services.metrics import FrameEval, average_precision, match_and_mpjpe
from domain.services.rendering import render_gaussian_heatmaps, render_pose_heatmaps, soft_argmax_3d
from infrastructure.synthesis.camera_rig import make_camera_rig
from infrastructure.synthesis.skeleton import sample_poses

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-4
COMPOSED_GRADIENT_TOLERANCE = 1e-3
ORACLE_HEATMAP_TOLERANCE = 1e-10
ORACLE_JOINT_TOLERANCE = 1e-9
HUNGARIAN_TRIALS = 200
HUNGARIAN_MAX_SIZE = 6
COHERENCE_FRAMES = 100


class Suite(str, Enum):
    GRADIENTS = "gradients"
    ORACLES = "oracles"
    INVARIANTS = "invariants"


class CheckResult(BaseModel):
    suite: Suite
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


class CheckReport(BaseModel):
    seed: int
    results: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]


Outcome = Tuple[bool, str]
Check = Callable[[int], Outcome]


def _below(value: float, limit: float, what: str = "error") -> Outcome:
    return value < limit, f"{what} {value:.3e} (limit {limit:.0e})"


def _small_rig(n_views: int = 3, image_size: Tuple[int, int] = (32, 32)):
    workspace = Workspace()
    return make_camera_rig(n_views, workspace, image_size=image_size), workspace


def _pivot(cams) -> Tuple[float, float]:
    W, H = cams[0].image_size
    return W / 2.0, H / 2.0


# gradients


def grad_gaussian_joints(seed: int) -> Outcome:
    rng = numpy_rng(seed, "grad-gaussian")
    joints = torch.tensor(rng.uniform(3.0, 13.0, size=(2, 2)))
    weights = torch.tensor([0.9, 0.6], dtype=torch.float64)
    err = gradient_relative_error(lambda j: render_gaussian_heatmaps(j, weights, (16, 16), 2.0), joints, seed=seed)
    ok = torch.autograd.gradcheck(
        lambda j: render_gaussian_heatmaps(j, weights, (16, 16), 2.0),
        (joints.clone().requires_grad_(True),),
        raise_exception=False,
    )
    return err < GRADIENT_TOLERANCE and ok, f"error {err:.3e}, gradcheck {'ok' if ok else 'failed'}"


def grad_gaussian_weights(seed: int) -> Outcome:
    joints = torch.tensor([[4.2, 5.7], [11.6, 10.1]], dtype=torch.float64)
    weights = torch.tensor([0.8, 0.5], dtype=torch.float64)
    err = gradient_relative_error(lambda w: render_gaussian_heatmaps(joints, w, (16, 16), 2.0), weights, seed=seed)
    return _below(err, GRADIENT_TOLERANCE)


def grad_soft_argmax(seed: int) -> Outcome:
    grid = VoxelGridSpec(center=(0.0, 0.0, 0.0), extent=(300.0, 300.0, 300.0), resolution=(4, 4, 4))
    volume = torch.tensor(numpy_rng(seed, "grad-softargmax").random((4, 4, 4)))
    err = gradient_relative_error(lambda v: soft_argmax_3d(v, grid, beta=10.0), volume, seed=seed)
    ok = torch.autograd.gradcheck(
        lambda v: soft_argmax_3d(v, grid, beta=10.0), (volume.clone().requires_grad_(True),), raise_exception=False
    )
    return err < GRADIENT_TOLERANCE and ok, f"error {err:.3e}, gradcheck {'ok' if ok else 'failed'}"


def grad_unproject(seed: int) -> Outcome:
    cams, workspace = _small_rig()
    grid = VoxelGridSpec(
        center=tuple(float(c) for c in workspace.center), extent=(1200.0, 1200.0, 900.0), resolution=(3, 3, 3)
    )
    t = AffineAugmentation(rotation_deg=12.0, scale=0.1, pivot=_pivot(cams))
    H = torch.tensor(numpy_rng(seed, "grad-unproject").uniform(0.1, 0.9, size=(3, 2, 8, 8)))

    def fn(x: torch.Tensor) -> torch.Tensor:
        return unproject_heatmaps(HeatmapSet(data=x), cams, grid, t, clamp=False).data

    return _below(gradient_relative_error(fn, H, seed=seed), GRADIENT_TOLERANCE)


def grad_cross_view_project(seed: int) -> Outcome:
    cams, workspace = _small_rig(image_size=(256, 256))
    poses = sample_poses(SkeletonSpec(), 1, workspace, numpy_rng(seed, "grad-xview"))
    t = AffineAugmentation(rotation_deg=-8.0, scale=-0.05, pivot=_pivot(cams))

    def fn(x: torch.Tensor) -> torch.Tensor:
        return cross_view_project(Pose3DSet(joints=x), cams, t).joints

    return _below(gradient_relative_error(fn, poses.joints, eps=1e-5, seed=seed), GRADIENT_TOLERANCE)


def _random(seed: int, key: str, shape, lo: float = 0.05, hi: float = 0.95) -> torch.Tensor:
    return torch.tensor(numpy_rng(seed, key).uniform(lo, hi, size=shape))


def grad_losses(seed: int) -> Outcome:
    shape = (2, 3, 6, 6)
    H1, P1, H2, P2, A = (_random(seed, k, shape) for k in ("h1", "p1", "h2", "p2", "a"))
    G = [_random(seed, k, (4, 4, 3)) for k in ("g0", "g1", "g2")]
    cases: Dict[str, float] = {
        "root_syn_loss": gradient_relative_error(lambda g: root_syn_loss(g, G[1]), G[0]),
        "root_consistency_loss": gradient_relative_error(lambda g: root_consistency_loss(g, G[1], G[2]), G[0]),
        "pose_heatmap_loss": gradient_relative_error(lambda h: pose_heatmap_loss(h, P1, H2, P2), H1),
        "attentive_heatmap_loss/H": gradient_relative_error(lambda h: attentive_heatmap_loss(h, P1, A), H1),
        "attentive_heatmap_loss/A": gradient_relative_error(lambda a: attentive_heatmap_loss(H1, P1, a), A),
        "attention_regularizer": gradient_relative_error(attention_regularizer, A),
        "hard_view_attention_loss": gradient_relative_error(
            hard_view_attention_loss, torch.tensor([0.3, 0.9, 0.5, 0.1], dtype=torch.float64)
        ),
    }

    rng = numpy_rng(seed, "grad-joint")
    y = torch.tensor(rng.uniform(20.0, 200.0, size=(3, 2, 5, 2)))
    offset = rng.uniform(0.5, 3.0, size=y.shape) * rng.choice([-1.0, 1.0], size=y.shape)
    mask = torch.ones(y.shape[:-1], dtype=torch.bool)
    pseudo = Pose2DSet(joints=y + torch.tensor(offset), confidence=torch.ones(y.shape[:-1]), visibility_mask=mask)
    pred = Pose2DSet(joints=y, confidence=torch.ones(y.shape[:-1]), visibility_mask=mask)
    assignments = match_views(pred, pseudo)
    for hard in (False, True):

        def fn(j: torch.Tensor, hard: bool = hard) -> torch.Tensor:
            moved = Pose2DSet(joints=j, confidence=pred.confidence, visibility_mask=mask)
            return joint_branch_loss(moved, pseudo, assignments, hard_view_attention=hard).value

        cases[f"joint_branch_loss/hard={hard}"] = gradient_relative_error(fn, y)

    worst = max(cases, key=cases.get)
    return cases[worst] < GRADIENT_TOLERANCE, f"worst {worst}: {cases[worst]:.3e} over {len(cases)} losses"


def grad_composed(seed: int) -> Outcome:
    """World poses through projection, rendering and both pose loss terms"""
    cams, workspace = _small_rig(image_size=(128, 128))
    skeleton = SkeletonSpec()
    poses = sample_poses(skeleton, 1, workspace, numpy_rng(seed, "grad-composed"))
    t = AffineAugmentation(rotation_deg=5.0, scale=0.05, pivot=_pivot(cams))
    shifted = Pose3DSet(joints=poses.joints + 40.0)
    target = cross_view_project(shifted, cams, t)
    H_target = render_pose_heatmaps(target, cams[0].heatmap_size, 3.0)
    assignments = None

    def fn(x: torch.Tensor) -> torch.Tensor:
        nonlocal assignments
        y = cross_view_project(Pose3DSet(joints=x), cams, t)
        H = render_pose_heatmaps(y, cams[0].heatmap_size, 3.0)
        if assignments is None:
            assignments = match_views(y, target)
        joint = joint_branch_loss(y, target, assignments).value
        return pose_heatmap_loss(H, H_target, H, H_target) + 0.01 * joint

    return _below(gradient_relative_error(fn, poses.joints, eps=1e-5, seed=seed), COMPOSED_GRADIENT_TOLERANCE)


# oracles


def brute_force_assignment_cost(cost: np.ndarray) -> float:
    P, Q = cost.shape
    if P > Q:
        return brute_force_assignment_cost(cost.T)
    return min(sum(cost[i, perm[i]] for i in range(P)) for perm in permutations(range(Q), P))


def oracle_hungarian(seed: int) -> Outcome:
    rng = numpy_rng(seed, "hungarian")
    for trial in range(HUNGARIAN_TRIALS):
        P, Q = rng.integers(1, HUNGARIAN_MAX_SIZE + 1, size=2)
        cost = rng.uniform(0.0, 100.0, size=(P, Q))
        pairs = hungarian(cost)
        got = sum(cost[i, j] for i, j in pairs)
        best = brute_force_assignment_cost(cost)
        if len(pairs) != min(P, Q) or abs(got - best) > 1e-9:
            return False, f"trial {trial} ({P}x{Q}): hungarian {got:.6f}, exhaustive {best:.6f}"
    return True, f"{HUNGARIAN_TRIALS} matrices up to {HUNGARIAN_MAX_SIZE}x{HUNGARIAN_MAX_SIZE}"


def oracle_zero_loss(seed: int) -> Outcome:
    """Ground truth through the projection path matches noise-free pseudo labels exactly"""
    skeleton, workspace = SkeletonSpec(), Workspace()
    cams = make_camera_rig(5, workspace, seed=seed)
    noise = PseudoNoiseModel.from_preset(NoisePreset.CLEAN)
    frame = generate_frame(0, 3, cams, skeleton, workspace, noise, seed)
    pair = sample_augmentation_pair(AugmentationConfig(), numpy_rng(seed, "oracle-aug"), cams[0].image_size, 5)
    gt = frame.gt_poses
    root = skeleton.root_index
    proposals = [
        RootProposal(position=tuple(float(v) for v in gt.joints[p, root]), score=1.0, voxel_index=(0, 0, 0))
        for p in range(gt.num_persons)
    ]
    bottleneck = BottleneckPoses(Y1=gt, Y2=gt, proposals=proposals)
    inputs = build_pose_loss_inputs(bottleneck, frame.pseudo_2d, cams, pair.t1, pair.t2, HyperParams())
    plain = LossConfig(l2_attention=False, l1_attention=False)
    components, _ = compute_pose_loss_components(inputs, plain)
    heatmap, joint = float(components.heatmap), float(components.joint)
    ok = heatmap < ORACLE_HEATMAP_TOLERANCE and joint < ORACLE_JOINT_TOLERANCE
    return ok, f"heatmap loss {heatmap:.3e}, joint loss {joint:.3e}"


def _root_peak(volume: torch.Tensor, center: np.ndarray, reach: int = 2) -> np.ndarray:
    lo = np.maximum(center - reach, 0)
    hi = np.minimum(center + reach + 1, np.asarray(volume.shape))
    window = volume[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]]
    local = np.unravel_index(int(torch.argmax(window)), tuple(window.shape))
    return lo + np.asarray(local)


def oracle_affine_coherence(seed: int) -> Outcome:
    """Root volumes unprojected under two augmentations peak at the same voxel"""
    skeleton, workspace = SkeletonSpec(), Workspace()
    cams = make_camera_rig(5, workspace, seed=seed)
    grid_config = GridConfig()
    grid = VoxelGridSpec(
        center=tuple(float(c) for c in workspace.center),
        extent=grid_config.coarse_extent,
        resolution=grid_config.coarse_resolution,
    )
    aug = AugmentationConfig()
    root = skeleton.root_index
    for i in range(COHERENCE_FRAMES):
        rng = numpy_rng(seed, "coherence", i)
        poses = sample_poses(skeleton, int(rng.integers(1, 4)), workspace, rng)
        roots = Pose3DSet(joints=poses.joints[:, root : root + 1])
        pair = sample_augmentation_pair(aug, rng, cams[0].image_size, len(cams))
        peaks = []
        for t in (pair.t1, pair.t2):
            H = render_pose_heatmaps(cross_view_project(roots, cams, t), cams[0].heatmap_size, 3.0)
            peaks.append(unproject_heatmaps(H, cams, grid, t).data[0])
        for p in range(roots.num_persons):
            center = np.rint((roots.joints[p, 0].numpy() - grid.lower) / grid.pitch).astype(int)
            a, b = _root_peak(peaks[0], center), _root_peak(peaks[1], center)
            if np.max(np.abs(a - b)) > 1:
                return False, f"frame {i} person {p}: peaks {a.tolist()} and {b.tolist()}"
    return True, f"{COHERENCE_FRAMES}/{COHERENCE_FRAMES} frames agree within 1 voxel"


def oracle_pipeline_recall(seed: int) -> Outcome:
    """Exact heatmaps through the bypassed networks find every person"""
    scene = generate_scene(3, 2, 5, seed=seed, noise=PseudoNoiseModel.from_preset(NoisePreset.CLEAN))
    report, _ = evaluate_scene(scene, oracle_bundle(scene), oracle=True)
    return report.recall_500 == 1.0, f"recall@500 {report.recall_500:.3f}, MPJPE {report.mpjpe_mm:.1f} mm"


# invariants


def invariant_affine_round_trip(seed: int) -> Outcome:
    rng = numpy_rng(seed, "affine-round-trip")
    worst = 0.0
    for _ in range(200):
        t = AffineAugmentation(
            rotation_deg=rng.uniform(-45, 45), scale=rng.uniform(-0.35, 0.35), pivot=tuple(rng.uniform(0, 256, 2))
        )
        uv = torch.tensor(rng.uniform(-100, 400, size=(8, 2)))
        back = apply_affine(invert_affine(t), apply_affine(t, uv))
        worst = max(worst, float((back - uv).abs().max()))
    return _below(worst, 1e-9, "max round-trip error (px)")


def invariant_soft_argmax_convexity(seed: int) -> Outcome:
    rng = numpy_rng(seed, "convexity")
    grid = VoxelGridSpec(center=(100.0, -50.0, 900.0), extent=(800.0, 600.0, 400.0), resolution=(5, 4, 3))
    for _ in range(100):
        volume = torch.tensor(rng.normal(0.0, 1.0, size=(5, 4, 3)))
        x = soft_argmax_3d(volume, grid, beta=float(rng.uniform(0.1, 200.0))).numpy()
        if np.any(x < grid.lower - 1e-9) or np.any(x > grid.upper + 1e-9):
            return False, f"soft-argmax {x.tolist()} left the grid"
    return True, "100 random volumes decode inside the grid"


def invariant_hungarian_shift(seed: int) -> Outcome:
    rng = numpy_rng(seed, "hungarian-shift")
    for trial in range(100):
        P, Q = rng.integers(1, 7, size=2)
        cost = rng.uniform(0.0, 10.0, size=(P, Q))
        if sorted(hungarian(cost)) != sorted(hungarian(cost + rng.uniform(-5.0, 50.0))):
            return False, f"trial {trial}: constant shift changed the assignment"
    return True, "assignments unchanged under 100 constant shifts"


def _random_frames(rng: np.random.Generator, n: int = 6) -> List[FrameEval]:
    frames = []
    for _ in range(n):
        G = int(rng.integers(0, 4))
        gt = rng.uniform(-2000, 2000, size=(G, 5, 3))
        P = int(rng.integers(0, 5))
        base = gt[rng.integers(0, G, size=P)] if G else rng.uniform(-2000, 2000, size=(P, 5, 3))
        pred = base + rng.normal(0.0, rng.uniform(5.0, 150.0), size=(P, 5, 3))
        frames.append(FrameEval.build(pred.reshape(P, 5, 3), rng.random(P), gt.reshape(G, 5, 3)))
    return frames


def invariant_ap_monotone(seed: int) -> Outcome:
    rng = numpy_rng(seed, "ap-monotone")
    thresholds = sorted([*AP_THRESHOLDS_MM, 10.0, 200.0, 500.0])
    for trial in range(100):
        frames = _random_frames(rng)
        values = [average_precision(frames, t) for t in thresholds]
        if any(b < a - 1e-12 for a, b in zip(values, values[1:])):
            return False, f"trial {trial}: AP {values} over thresholds {thresholds}"
    return True, "AP non-decreasing in the threshold on 100 fuzzed prediction sets"


def invariant_metric_symmetries(seed: int) -> Outcome:
    """Person reordering and a shared rigid translation leave the metrics unchanged"""
    rng = numpy_rng(seed, "metric-symmetry")
    for trial in range(50):
        gt = rng.uniform(-2000, 2000, size=(3, 5, 3))
        pred = gt[rng.permutation(3)] + rng.normal(0.0, 30.0, size=(3, 5, 3))
        _, errors = match_and_mpjpe(pred, gt)
        _, permuted = match_and_mpjpe(pred[rng.permutation(3)], gt[rng.permutation(3)])
        shift = rng.uniform(-500, 500, size=3)
        _, moved = match_and_mpjpe(pred + shift, gt + shift)
        if not (np.allclose(sorted(errors), sorted(permuted)) and np.allclose(sorted(errors), sorted(moved))):
            return False, f"trial {trial}: MPJPE changed under reordering or translation"
    return True, "MPJPE invariant under reordering and translation on 50 instances"


def invariant_unproject_linearity(seed: int) -> Outcome:
    cams, workspace = _small_rig()
    grid = VoxelGridSpec(
        center=tuple(float(c) for c in workspace.center), extent=(3000.0, 3000.0, 1500.0), resolution=(6, 6, 4)
    )
    t = AffineAugmentation(rotation_deg=20.0, scale=-0.2, pivot=_pivot(cams))
    rng = numpy_rng(seed, "linearity")
    H1, H2 = (torch.tensor(rng.uniform(0.0, 0.5, size=(3, 2, 8, 8))) for _ in range(2))
    a, b = 0.7, 0.9

    def U(x: torch.Tensor) -> torch.Tensor:
        return unproject_heatmaps(HeatmapSet(data=x), cams, grid, t, clamp=False).data

    gap = float((U(a * H1 + b * H2) - (a * U(H1) + b * U(H2))).abs().max())
    return _below(gap, 1e-12, "linearity gap")


def invariant_projection_triangulation(seed: int) -> Outcome:
    cams = make_camera_rig(4, Workspace(), seed=seed)
    rng = numpy_rng(seed, "dlt")
    worst = 0.0
    for _ in range(50):
        X = rng.uniform([-1500, -1500, 200], [1500, 1500, 1800])
        recovered = triangulate_dlt([(cam, project_point(cam, X).numpy()) for cam in cams])
        worst = max(worst, float(np.abs(recovered - X).max()))
    return _below(worst, 1e-4, "max triangulation error (mm)")


def invariant_pseudo_mapping(seed: int) -> Outcome:
    """Pseudo labels mapped by an augmentation and back land where they started"""
    cams = make_camera_rig(3, Workspace(), seed=seed)
    frame = generate_frame(0, 2, cams, SkeletonSpec(), Workspace(), PseudoNoiseModel(), seed)
    t = AffineAugmentation(rotation_deg=15.0, scale=-0.2, pivot=_pivot(cams))
    moved = map_pseudo(frame.pseudo_2d, t, cams)
    back = apply_affine(invert_affine(t), moved.joints)
    mask = moved.visibility_mask
    gap = float((back[mask] - frame.pseudo_2d.joints[mask]).abs().max()) if bool(mask.any()) else 0.0
    return _below(gap, 1e-9, "round-trip gap (px)")


SUITES: Dict[Suite, List[Tuple[str, Check]]] = {
    Suite.GRADIENTS: [
        ("render_gaussian_heatmap/joints", grad_gaussian_joints),
        ("render_gaussian_heatmap/weights", grad_gaussian_weights),
        ("soft_argmax_3d", grad_soft_argmax),
        ("unproject_heatmaps", grad_unproject),
        ("cross_view_project", grad_cross_view_project),
        ("losses", grad_losses),
        ("composed_pose_loss", grad_composed),
    ],
    Suite.ORACLES: [
        ("hungarian_vs_exhaustive", oracle_hungarian),
        ("oracle_zero_loss", oracle_zero_loss),
        ("affine_coherence", oracle_affine_coherence),
        ("oracle_pipeline_recall", oracle_pipeline_recall),
    ],
    Suite.INVARIANTS: [
        ("affine_round_trip", invariant_affine_round_trip),
        ("soft_argmax_convexity", invariant_soft_argmax_convexity),
        ("hungarian_constant_shift", invariant_hungarian_shift),
        ("ap_monotone", invariant_ap_monotone),
        ("metric_symmetries", invariant_metric_symmetries),
        ("unproject_linearity", invariant_unproject_linearity),
        ("projection_triangulation", invariant_projection_triangulation),
        ("pseudo_mapping_round_trip", invariant_pseudo_mapping),
    ],
}


def run_check(suite: Suite, name: str, check: Check, seed: int) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, detail = check(seed)
    except Exception as e:
        logger.error(f"Check {suite.value}/{name} raised {type(e).__name__}", exc_info=True)
        passed, detail = False, f"{type(e).__name__}: {e}"
    seconds = time.perf_counter() - start
    logger.info(f"{suite.value}/{name}: {'PASS' if passed else 'FAIL'} ({detail}, {seconds:.1f} s)")
    return CheckResult(suite=suite, name=name, passed=bool(passed), detail=detail, seconds=seconds)


class RunPropertyChecksUseCase:
    def __init__(self, suites: Optional[Dict[Suite, List[Tuple[str, Check]]]] = None):
        self.suites = suites or SUITES

    def execute(self, suites: Sequence[Suite], seed: int = 0) -> CheckReport:
        logger.info(f"Executing RunPropertyChecksUseCase for {', '.join(s.value for s in suites)} (seed {seed})")
        report = CheckReport(seed=seed)
        for suite in suites:
            suite_seed = derive_seed(seed, suite.value)
            for name, check in self.suites[suite]:
                report.results.append(run_check(suite, name, check, suite_seed))
        logger.info(f"{len(report.results) - len(report.failures)}/{len(report.results)} checks passed")
        return report
