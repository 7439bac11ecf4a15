"""
Test cases for the on-disk formats: TensorBlobs, checkpoints, scene and root
dataset directories, evaluation reports and the loss log.
"""

import json
from collections import Counter

import numpy as np
import pytest
import torch
from torch.optim import Adam
from torch.optim.lr_scheduler import MultiStepLR

from application.interfaces.checkpoint_repository import CheckpointState
from application.interfaces.report_repository import LossRecord
from domain.errors import EmptyDataset, FormatError
from domain.models.report import REPORT_SCHEMA, EvalReport, PcpResult
from domain.models.training import ModelConfig, StageName
from infrastructure.networks.bundle import build_model_bundle
from infrastructure.persistence.checkpoint_store import FileCheckpointRepository, decode_checkpoint, encode_checkpoint
from infrastructure.persistence.file_root_dataset_repository import FileRootDatasetRepository
from infrastructure.persistence.file_scene_repository import MANIFEST_FILE, FileSceneRepository, read_cameras
from infrastructure.persistence.report_store import JsonLinesLossLog, JsonReportRepository
from infrastructure.persistence.tensor_blob import decode_blob, encode_blob, read_blob, write_blob
from infrastructure.synthesis.root_dataset import generate_root_dataset


@pytest.fixture
def trained_state(skeleton, workspace) -> CheckpointState:
    """A tiny bundle after one Adam step, as a checkpoint state"""
    bundle = build_model_bundle(skeleton, workspace, ModelConfig(width_2d=4, width_attn=4, width_3d=4))
    params = list(bundle.heatmap_net_2d.parameters())
    optimizer = Adam(params, lr=1e-3)
    bundle.heatmap_net_2d(torch.rand(1, 3, 32, 32)).sum().backward()
    optimizer.step()
    scheduler = MultiStepLR(optimizer, milestones=[1, 1, 4], gamma=0.1)
    scheduler.step()
    return CheckpointState(
        architecture=bundle.architecture(),
        stage=StageName.PRETRAIN,
        step=1,
        epoch=0,
        completed=False,
        parameters={k: v.detach().clone() for k, v in bundle.state_dict().items()},
        optimizer=optimizer.state_dict(),
        scheduler=scheduler.state_dict(),
    )


class TestTensorBlob:
    """Test the binary array container"""

    def test_rewrite_is_bit_exact(self, rng):
        """Test that encode, decode, encode reproduces the bytes"""
        data = encode_blob(rng.normal(size=(3, 4, 5)).astype(np.float32))
        assert encode_blob(decode_blob(data)) == data

    def test_header_layout(self):
        """Test magic, dtype code, rank and little-endian dims"""
        data = encode_blob(np.zeros((2, 3), dtype=np.float32))
        assert data[:4] == b"SPT1"
        assert data[4:6] == bytes([1, 2])
        assert data[6:14] == (2).to_bytes(4, "little") + (3).to_bytes(4, "little")
        assert len(data) == 14 + 4 * 6

    def test_float64_is_stored_as_float32(self):
        """Test that wider inputs are narrowed on write"""
        decoded = decode_blob(encode_blob(torch.tensor([1.5, 2.25], dtype=torch.float64)))
        assert decoded.dtype == np.float32
        assert decoded.tolist() == [1.5, 2.25]

    def test_scalar_and_empty(self):
        """Test zero-dimensional and zero-sized arrays"""
        assert decode_blob(encode_blob(np.float32(3.0))).shape == ()
        assert decode_blob(encode_blob(np.zeros((0, 15, 3), dtype=np.float32))).shape == (0, 15, 3)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: b"XXXX" + d[4:],
            lambda d: d[:4] + bytes([2]) + d[5:],
            lambda d: d[:-1],
            lambda d: d + b"\x00",
            lambda d: d[:5],
        ],
    )
    def test_corrupt_blobs(self, mutate):
        """Test that bad magic, dtype, truncation and trailing bytes are rejected"""
        with pytest.raises(FormatError):
            decode_blob(mutate(encode_blob(np.ones((2, 2), dtype=np.float32))))

    def test_files(self, tmp_path):
        """Test writing, reading and a missing file"""
        write_blob(tmp_path / "a.spt", np.arange(6, dtype=np.float32).reshape(2, 3))
        assert read_blob(tmp_path / "a.spt").tolist() == [[0, 1, 2], [3, 4, 5]]
        with pytest.raises(FormatError):
            read_blob(tmp_path / "missing.spt")


class TestCheckpoints:
    """Test the checkpoint file format and repository"""

    def test_rewrite_is_bit_exact(self, trained_state):
        """Test that a decoded checkpoint encodes to the same bytes"""
        data = encode_checkpoint(trained_state)
        assert encode_checkpoint(decode_checkpoint(data)) == data

    def test_contents_survive(self, trained_state):
        """Test that parameters, optimizer moments and progress are restored"""
        restored = decode_checkpoint(encode_checkpoint(trained_state))
        assert restored.stage == StageName.PRETRAIN and restored.step == 1 and not restored.completed
        assert restored.architecture == trained_state.architecture
        for name, value in trained_state.parameters.items():
            assert torch.equal(restored.parameters[name], value.to(torch.float32))
        for idx, entry in trained_state.optimizer["state"].items():
            assert torch.equal(restored.optimizer["state"][idx]["exp_avg"], entry["exp_avg"])

    def test_scheduler_survives(self, trained_state):
        """Test that the learning-rate ladder restores with repeated milestones and its position"""
        restored = decode_checkpoint(encode_checkpoint(trained_state))
        assert restored.scheduler == trained_state.scheduler
        params = [torch.nn.Parameter(torch.zeros(1))]
        scheduler = MultiStepLR(Adam(params, lr=1e-3), milestones=[9], gamma=0.1)
        scheduler.load_state_dict(restored.scheduler)
        assert scheduler.milestones == Counter({1: 2, 4: 1})
        assert scheduler.last_epoch == 1
        for _ in range(3):
            scheduler.step()
        assert scheduler.get_last_lr()[0] == pytest.approx(1e-4)

    def test_bad_magic(self, trained_state):
        """Test that a foreign file is rejected"""
        data = encode_checkpoint(trained_state)
        with pytest.raises(FormatError):
            decode_checkpoint(b"NOPE" + data[4:])

    def test_truncated(self, trained_state):
        """Test that a cut-off checkpoint is rejected"""
        with pytest.raises(FormatError):
            decode_checkpoint(encode_checkpoint(trained_state)[:-10])

    def test_repository_find(self, tmp_path, trained_state):
        """Test that incomplete checkpoints are only found on request"""
        repo = FileCheckpointRepository(tmp_path)
        path = repo.save(trained_state)
        assert path.name == "pretrain.ckpt"
        assert repo.find(StageName.PRETRAIN) is None
        assert repo.find(StageName.PRETRAIN, completed_only=False) == path
        repo.save(trained_state.model_copy(update={"completed": True}))
        assert repo.find(StageName.PRETRAIN) == path
        assert repo.find(StageName.ROOT) is None
        assert repo.list() == [path]

    def test_missing_file(self, tmp_path):
        """Test loading a checkpoint that does not exist"""
        with pytest.raises(FormatError):
            FileCheckpointRepository(tmp_path).load(tmp_path / "nothing.ckpt")


class TestSceneRepository:
    """Test scene directories"""

    def test_rewrite_is_bit_exact(self, tmp_path, clean_scene):
        """Test that saving a loaded scene reproduces every file"""
        first, second = tmp_path / "a", tmp_path / "b"
        FileSceneRepository(first).save_scene(clean_scene)
        FileSceneRepository(second).save_scene(FileSceneRepository(first).load_scene())
        files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        for rel in files:
            assert (first / rel).read_bytes() == (second / rel).read_bytes()

    def test_loaded_contents(self, tmp_path, clean_scene):
        """Test that cameras, images and pseudo labels come back"""
        repo = FileSceneRepository(tmp_path)
        repo.save_scene(clean_scene)
        loaded = repo.load_scene()
        assert loaded.cams == clean_scene.cams
        assert loaded.seed == clean_scene.seed
        frame, original = loaded.frames[1], clean_scene.frames[1]
        assert np.array_equal(frame.images, original.images)
        assert torch.equal(frame.pseudo_2d.visibility_mask, original.pseudo_2d.visibility_mask)
        assert torch.allclose(frame.gt_poses.joints.double(), original.gt_poses.joints, atol=1e-3)
        assert read_cameras(tmp_path) == clean_scene.cams

    def test_missing_manifest(self, tmp_path):
        """Test loading from an empty directory"""
        with pytest.raises(FormatError):
            FileSceneRepository(tmp_path).load_scene()

    def test_invalid_manifest(self, tmp_path, clean_scene):
        """Test that a manifest with a view count mismatch is rejected"""
        FileSceneRepository(tmp_path).save_scene(clean_scene)
        manifest = json.loads((tmp_path / MANIFEST_FILE).read_text())
        manifest["frames"][0]["image_blobs"].pop()
        (tmp_path / MANIFEST_FILE).write_text(json.dumps(manifest))
        with pytest.raises(FormatError):
            FileSceneRepository(tmp_path).load_scene()


class TestRootDatasetRepository:
    """Test root dataset directories"""

    def test_save_and_load(self, tmp_path, small_rig, workspace, coarse_grid):
        """Test that samples come back with their roots and arrays"""
        samples = generate_root_dataset(3, small_rig, workspace, coarse_grid, 2, 3.0, 400.0, seed=1)
        repo = FileRootDatasetRepository(tmp_path)
        repo.save_samples(samples, small_rig, seed=1)
        loaded = repo.load_samples()
        assert [s.roots for s in loaded] == [s.roots for s in samples]
        assert torch.equal(loaded[2].gt_root_volume, samples[2].gt_root_volume)
        assert torch.equal(loaded[0].root_heatmaps.data, samples[0].root_heatmaps.data)
        assert repo.load_cameras() == small_rig

    def test_refuses_empty(self, tmp_path, small_rig):
        """Test that an empty dataset is not written"""
        with pytest.raises(EmptyDataset):
            FileRootDatasetRepository(tmp_path).save_samples([], small_rig, seed=0)


class TestReports:
    """Test evaluation report files"""

    def test_round_trip(self, tmp_path):
        """Test that a saved report loads equal and rewrites identically"""
        report = EvalReport(
            ap={"25": 0.1, "50": 0.4, "100": 0.9, "150": 0.95},
            recall_500=1.0,
            mpjpe_mm=42.0,
            pcp=PcpResult(per_actor={"0": 0.8}, average=0.8),
            meta={"checkpoint": "run/pose_l1l2.ckpt"},
        )
        repo = JsonReportRepository()
        repo.save_report(report, tmp_path / "a.json")
        loaded = repo.load_report(tmp_path / "a.json")
        assert loaded == report
        repo.save_report(loaded, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert json.loads((tmp_path / "a.json").read_text())["schema"] == REPORT_SCHEMA

    def test_wrong_schema(self, tmp_path):
        """Test that another schema tag is rejected"""
        (tmp_path / "r.json").write_text(json.dumps({"schema": "something-else/2"}))
        with pytest.raises(FormatError):
            JsonReportRepository().load_report(tmp_path / "r.json")

    def test_not_json(self, tmp_path):
        """Test that unreadable reports are rejected"""
        (tmp_path / "r.json").write_text("{")
        with pytest.raises(FormatError):
            JsonReportRepository().load_report(tmp_path / "r.json")


class TestLossLog:
    """Test the JSON-lines loss log"""

    def test_append_and_read(self, tmp_path):
        """Test that records are kept in order"""
        log = JsonLinesLossLog(tmp_path / "loss.jsonl")
        assert log.read() == []
        for step in (1, 2):
            log.append(LossRecord(step=step, stage="root", loss_total=float(step)))
        assert [r.loss_total for r in log.read()] == [1.0, 2.0]

    def test_truncate_after(self, tmp_path):
        """Test that only later records of the given stage are dropped"""
        log = JsonLinesLossLog(tmp_path / "loss.jsonl")
        for step in range(1, 5):
            log.append(LossRecord(step=step, stage="pretrain", loss_total=1.0))
        log.append(LossRecord(step=9, stage="root", loss_total=1.0))
        log.truncate_after("pretrain", 2)
        assert [(r.stage, r.step) for r in log.read()] == [("pretrain", 1), ("pretrain", 2), ("root", 9)]

    def test_bad_line(self, tmp_path):
        """Test that a malformed record is reported"""
        (tmp_path / "loss.jsonl").write_text('{"step": "x"}\n')
        with pytest.raises(FormatError):
            JsonLinesLossLog(tmp_path / "loss.jsonl").read()
