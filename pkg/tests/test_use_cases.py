"""
Test cases for the application use cases: training stages, pose estimation,
evaluation, plotting, property suites and dataset generation.
"""

import pytest
import torch

from application.interfaces.report_repository import LossRecord
from application.use_cases.estimate_poses import cross_view_project, map_pseudo, oracle_heatmaps
from application.use_cases.evaluate_scene import EvaluateSceneUseCase, evaluate_scene, oracle_bundle
from application.use_cases.generate_root_dataset import GenerateRootDatasetUseCase
from application.use_cases.generate_scene import GenerateSceneUseCase
from application.use_cases.localize_roots import LocalizeRootsUseCase, extract_root_heatmaps
from application.use_cases.plot_report import PlotReportUseCase
from application.use_cases.run_property_checks import RunPropertyChecksUseCase, Suite, oracle_zero_loss
from application.use_cases.run_stage import RunStageUseCase, stage_sequence
from config import TrainConfig
from domain.errors import EmptyDataset, IndexOutOfRange, StageOrderViolation
from domain.models.camera import AffineAugmentation
from domain.models.poses import Pose3DSet
from domain.models.report import EvalReport, FramePrediction, PrCurve
from domain.models.scene import NoisePreset, SyntheticScene
from domain.models.training import HyperParams, StageName
from domain.models.volumes import HeatmapSet, RootBranch
from domain.services.geometry import project_points
from infrastructure.persistence.checkpoint_store import FileCheckpointRepository
from infrastructure.persistence.report_store import JsonLinesLossLog, JsonReportRepository
from infrastructure.plotting.matplotlib_plotter import MatplotlibReportPlotter
from tests.conftest import TINY_OVERRIDES


def runner(run_dir) -> RunStageUseCase:
    return RunStageUseCase(FileCheckpointRepository(run_dir), JsonLinesLossLog(run_dir / "loss_log.jsonl"))


def final_parameters(run_dir, stage: StageName):
    repo = FileCheckpointRepository(run_dir)
    return repo.load(repo.find(stage)).parameters


class TestRunStage:
    """Test stage ordering, checkpoints and resumption"""

    def test_pose_stage_needs_root_checkpoint(self, tmp_path, clean_scene, tiny_config):
        """Test that pose_l2 without a completed root stage is refused"""
        with pytest.raises(StageOrderViolation):
            runner(tmp_path).execute(StageName.POSE_L2, clean_scene, tiny_config)

    def test_empty_scene(self, tmp_path, clean_scene, tiny_config):
        """Test that a scene without frames cannot be trained on"""
        empty = SyntheticScene(cams=clean_scene.cams, frames=[])
        with pytest.raises(EmptyDataset):
            runner(tmp_path).execute(StageName.PRETRAIN, empty, tiny_config)

    def test_stage_sequence(self):
        """Test that "all" expands to the four stages in order"""
        assert stage_sequence("all") == [StageName.PRETRAIN, StageName.ROOT, StageName.POSE_L2, StageName.POSE_L1L2]
        assert stage_sequence("root") == [StageName.ROOT]

    def test_pretrain_writes_checkpoint_and_losses(self, tmp_path, clean_scene, tiny_config):
        """Test that a completed stage leaves a checkpoint and one loss record per step"""
        outcome = runner(tmp_path).execute(StageName.PRETRAIN, clean_scene, tiny_config)
        assert outcome.completed
        assert FileCheckpointRepository(tmp_path).find(StageName.PRETRAIN) is not None
        records = JsonLinesLossLog(tmp_path / "loss_log.jsonl").read()
        assert [r.step for r in records] == [1, 2]
        assert all(r.stage == "pretrain" for r in records)

    def test_resume_matches_uninterrupted_run(self, tmp_path, clean_scene):
        """Test that stopping and resuming gives the same weights as one run"""
        config = TrainConfig.from_file(None, {**TINY_OVERRIDES, "stages.pretrain.epochs": 2})
        runner(tmp_path / "full").execute(StageName.PRETRAIN, clean_scene, config)

        interrupted = runner(tmp_path / "split").execute(StageName.PRETRAIN, clean_scene, config, stop_after=2)
        assert not interrupted.completed
        assert FileCheckpointRepository(tmp_path / "split").find(StageName.PRETRAIN) is None
        resumed = runner(tmp_path / "split").execute(StageName.PRETRAIN, clean_scene, config)
        assert resumed.results[0].resumed_from == 2

        full = final_parameters(tmp_path / "full", StageName.PRETRAIN)
        split = final_parameters(tmp_path / "split", StageName.PRETRAIN)
        assert full.keys() == split.keys()
        assert all(torch.equal(full[k], split[k]) for k in full)
        steps = [r.step for r in JsonLinesLossLog(tmp_path / "split" / "loss_log.jsonl").read()]
        assert steps == [1, 2, 3, 4]

    def test_resume_across_lr_milestone(self, tmp_path, clean_scene):
        """Test that a resumed run keeps the decayed learning rate of its checkpoint"""
        overrides = {**TINY_OVERRIDES, "stages.pretrain.epochs": 3, "stages.pretrain.lr_milestones": [1]}
        config = TrainConfig.from_file(None, overrides)
        runner(tmp_path / "full").execute(StageName.PRETRAIN, clean_scene, config)
        runner(tmp_path / "split").execute(StageName.PRETRAIN, clean_scene, config, stop_after=3)

        repo = FileCheckpointRepository(tmp_path / "split")
        saved = repo.load(repo.find(StageName.PRETRAIN, completed_only=False)).scheduler
        assert saved["last_epoch"] == 1
        assert saved["_last_lr"] == pytest.approx([config.stages.pretrain.lr * 0.1])

        runner(tmp_path / "split").execute(StageName.PRETRAIN, clean_scene, config)
        full = final_parameters(tmp_path / "full", StageName.PRETRAIN)
        split = final_parameters(tmp_path / "split", StageName.PRETRAIN)
        assert all(torch.equal(full[k], split[k]) for k in full)

    def test_completed_stage_is_skipped(self, tmp_path, clean_scene, tiny_config):
        """Test that rerunning a completed stage trains nothing"""
        runner(tmp_path).execute(StageName.PRETRAIN, clean_scene, tiny_config)
        again = runner(tmp_path).execute(StageName.PRETRAIN, clean_scene, tiny_config)
        assert again.results[0].completed
        assert len(JsonLinesLossLog(tmp_path / "loss_log.jsonl").read()) == 2

    def test_same_seed_same_weights(self, tmp_path, clean_scene, tiny_config):
        """Test that two runs with one seed produce identical checkpoints"""
        for name in ("a", "b"):
            runner(tmp_path / name).execute(StageName.PRETRAIN, clean_scene, tiny_config)
        a = final_parameters(tmp_path / "a", StageName.PRETRAIN)
        b = final_parameters(tmp_path / "b", StageName.PRETRAIN)
        assert all(torch.equal(a[k], b[k]) for k in a)

    @pytest.mark.slow
    def test_all_stages(self, tmp_path, clean_scene, tiny_config):
        """Test a tiny run through every stage"""
        outcome = runner(tmp_path).execute("all", clean_scene, tiny_config)
        assert [r.stage for r in outcome.results] == list(StageName)
        assert outcome.completed
        assert FileCheckpointRepository(tmp_path).find(StageName.POSE_L1L2) is not None


class TestPoseEstimationPieces:
    """Test projection of bottleneck poses and pseudo-label mapping"""

    def test_cross_view_projection_without_augmentation(self, oracle_scene):
        """Test that identity augmentation gives the plain projections"""
        frame, cams = oracle_scene.frames[0], oracle_scene.cams
        y = cross_view_project(frame.gt_poses, cams, AffineAugmentation.identity((128.0, 128.0)))
        for c, cam in enumerate(cams):
            uv, _ = project_points(cam, frame.gt_poses.joints)
            vis = y.visibility_mask[c]
            assert torch.allclose(y.joints[c][vis], uv[vis], atol=1e-9)

    def test_source_visibility_is_optional(self, simple_camera):
        """Test that a joint outside the original image is kept only without the source mask"""
        pose = Pose3DSet(joints=torch.tensor([[[140.0, 0.0, 1000.0], [0.0, 0.0, 1000.0]]], dtype=torch.float64))
        t = AffineAugmentation(scale=-0.5, pivot=(128.0, 128.0))
        y = cross_view_project(pose, [simple_camera], t)
        assert y.visibility_mask[0, 0].tolist() == [True, True]
        assert torch.allclose(y.joints[0, 0, 0], torch.tensor([198.0, 128.0], dtype=torch.float64))
        masked = cross_view_project(pose, [simple_camera], t, require_source_visible=True)
        assert masked.visibility_mask[0, 0].tolist() == [False, True]

    def test_clean_pseudo_labels_match_projection(self, oracle_scene):
        """Test that noise-free pseudo labels equal the ground-truth projection"""
        frame, cams = oracle_scene.frames[1], oracle_scene.cams
        t = AffineAugmentation.identity((128.0, 128.0))
        y = cross_view_project(frame.gt_poses, cams, t)
        pseudo = map_pseudo(frame.pseudo_2d, t, cams)
        assert torch.equal(y.visibility_mask, pseudo.visibility_mask)
        assert torch.allclose(y.joints, pseudo.joints, atol=1e-9)

    def test_oracle_zero_loss(self):
        """Test that ground truth through the loss path costs nothing"""
        passed, detail = oracle_zero_loss(5)
        assert passed, detail

    def test_three_branch_localization(self, oracle_scene):
        """Test that augmented exact heatmaps localize every root in all three branches"""
        frame, cams = oracle_scene.frames[0], oracle_scene.cams
        t0 = AffineAugmentation.identity((128.0, 128.0))
        t1 = AffineAugmentation(rotation_deg=5.0, scale=0.05, pivot=(128.0, 128.0))
        t2 = AffineAugmentation(rotation_deg=-4.0, scale=-0.05, pivot=(128.0, 128.0))
        sigma = HyperParams().sigma_hm
        heatmaps = tuple(
            HeatmapSet(data=oracle_heatmaps(frame.gt_poses, cams, t, sigma).data.to(torch.float32))
            for t in (t0, t1, t2)
        )
        result = LocalizeRootsUseCase(oracle_bundle(oracle_scene)).execute(heatmaps, cams, t1, t2)
        assert [G.branch for G in (result.G0, result.G1, result.G2)] == [RootBranch.G0, RootBranch.G1, RootBranch.G2]
        found = torch.tensor([p.position for p in result.proposals], dtype=torch.float64)
        roots = frame.gt_poses.joints[:, oracle_scene.skeleton.root_index].to(torch.float64)
        assert len(found) >= len(roots)
        assert torch.cdist(roots, found).min(dim=1).values.max() < 500.0

    def test_root_channel_bounds(self):
        """Test that a missing root channel is reported"""
        with pytest.raises(IndexOutOfRange):
            extract_root_heatmaps(HeatmapSet(data=torch.zeros(2, 15, 4, 4)), 15)


class TestEvaluation:
    """Test oracle evaluation and report writing"""

    def test_oracle_finds_every_person(self, oracle_scene):
        """Test that exact heatmaps through the bypassed networks recall everyone"""
        report, results = evaluate_scene(oracle_scene, oracle_bundle(oracle_scene), oracle=True)
        assert report.recall_500 == 1.0
        assert report.counts.missed == 0
        assert len(results) == len(oracle_scene.frames)
        assert report.meta["mode"] == "oracle"

    def test_use_case_writes_report(self, tmp_path, oracle_scene):
        """Test that the report file is written and loads back"""
        repo = JsonReportRepository()
        out = tmp_path / "report.json"
        report = EvaluateSceneUseCase(FileCheckpointRepository(tmp_path), repo).execute(
            oracle_scene, out, oracle=True, num_views=3
        )
        assert repo.load_report(out) == report
        assert report.meta["views"] == "3"

    def test_source_must_be_unambiguous(self, tmp_path, oracle_scene):
        """Test that neither or both sources are refused"""
        use_case = EvaluateSceneUseCase(FileCheckpointRepository(tmp_path), JsonReportRepository())
        with pytest.raises(ValueError):
            use_case.execute(oracle_scene, tmp_path / "r.json")
        with pytest.raises(ValueError):
            use_case.execute(oracle_scene, tmp_path / "r.json", checkpoint=tmp_path / "x.ckpt", oracle=True)


class TestPlotReport:
    """Test figure rendering"""

    def test_writes_figures(self, tmp_path, clean_scene):
        """Test that curves, bars, histogram, losses and overlays are written"""
        gt = clean_scene.frames[0].gt_poses.joints
        report = EvalReport(
            ap={"25": 0.2, "50": 0.5, "100": 0.9, "150": 1.0},
            recall_500=1.0,
            mpjpe_mm=30.0,
            pr_curves={"50": PrCurve(recall=[0.5, 1.0], precision=[1.0, 0.5])},
            pair_errors_mm=[20.0, 40.0],
            frames=[FramePrediction(id=0, poses=(gt + 10.0).tolist(), scores=[0.9, 0.8])],
        )
        repo = JsonReportRepository()
        repo.save_report(report, tmp_path / "report.json")
        log = JsonLinesLossLog(tmp_path / "loss_log.jsonl")
        for step in (1, 2, 3):
            log.append(LossRecord(step=step, stage="pose_l2", loss_total=1.0 / step, loss_H=0.5, loss_J=3.0))

        written = PlotReportUseCase(repo, MatplotlibReportPlotter()).execute(
            tmp_path / "report.json", tmp_path / "figures", loss_log=log, scene=clean_scene
        )
        assert len(written) == 5
        assert all(p.is_file() and p.stat().st_size > 0 for p in written)

    def test_minimum_figures(self, tmp_path):
        """Test that an empty report still gives at least the curves and bars"""
        repo = JsonReportRepository()
        repo.save_report(EvalReport(), tmp_path / "report.json")
        written = PlotReportUseCase(repo, MatplotlibReportPlotter()).execute(tmp_path / "report.json", tmp_path)
        assert len(written) >= 2


class TestPropertyChecks:
    """Test the property suite runner"""

    def test_reports_failures_and_exceptions(self):
        """Test that failing and raising checks are both reported"""

        def boom(seed):
            raise RuntimeError("broken")

        checks = [("ok", lambda s: (True, "fine")), ("bad", lambda s: (False, "nope")), ("boom", boom)]
        suites = {Suite.INVARIANTS: checks}
        report = RunPropertyChecksUseCase(suites).execute([Suite.INVARIANTS], seed=1)
        assert not report.passed
        assert [r.name for r in report.failures] == ["bad", "boom"]
        assert "RuntimeError" in report.failures[1].detail

    def test_checks_receive_derived_seed(self, mocker):
        """Test that each suite passes one derived seed to its checks"""
        check = mocker.Mock(return_value=(True, ""))
        RunPropertyChecksUseCase({Suite.GRADIENTS: [("a", check), ("b", check)]}).execute([Suite.GRADIENTS], seed=3)
        seeds = [c.args[0] for c in check.call_args_list]
        assert len(seeds) == 2 and seeds[0] == seeds[1] != 3

    @pytest.mark.slow
    @pytest.mark.parametrize("suite", list(Suite))
    def test_builtin_suites_pass(self, suite):
        """Test the shipped suites"""
        report = RunPropertyChecksUseCase().execute([suite], seed=0)
        assert report.passed, [(r.name, r.detail) for r in report.failures]


class TestDatasetUseCases:
    """Test scene and root dataset generation use cases"""

    def test_generate_scene_saves(self, mocker):
        """Test that the generated scene is handed to the repository"""
        repo = mocker.Mock()
        scene = GenerateSceneUseCase(repo).execute(1, 1, 2, seed=4, noise_preset=NoisePreset.CLEAN)
        repo.save_scene.assert_called_once_with(scene)
        assert len(scene.cams) == 2 and scene.seed == 4

    def test_generate_root_dataset_saves(self, mocker, small_rig, tiny_config):
        """Test that samples on the configured grid are handed to the repository"""
        repo = mocker.Mock()
        samples = GenerateRootDatasetUseCase(repo).execute(small_rig, 3, 2, seed=1, grid_config=tiny_config.grid)
        repo.save_samples.assert_called_once_with(samples, small_rig, 1)
        assert samples[0].gt_root_volume.shape == (8, 8, 4)
