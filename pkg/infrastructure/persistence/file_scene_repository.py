"""
Directory-backed scene repository: manifest.json and calibration.json plus one
TensorBlob per array.
"""

import json
import logging
from pathlib import Path
from typing import List

import numpy as np
import torch
from pydantic import TypeAdapter, ValidationError

from application.interfaces.scene_repository import AbstractSceneRepository
from domain.errors import FormatError
from domain.models.camera import CameraCalibration
from domain.models.manifest import FrameEntry, SceneManifest
from domain.models.poses import Pose2DSet, Pose3DSet
from domain.models.scene import SceneFrame, SyntheticScene
from infrastructure.persistence.tensor_blob import read_blob, write_blob

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
CALIBRATION_FILE = "calibration.json"
BLOB_DIR = "blobs"

_cameras_adapter = TypeAdapter(List[CameraCalibration])


def pack_pseudo(pseudo: Pose2DSet) -> np.ndarray:
    """(C, P, J, 4): u, v, confidence, visibility"""
    j = pseudo.joints.detach().cpu().to(torch.float32)
    conf = pseudo.confidence.detach().cpu().to(torch.float32)[..., None]
    vis = pseudo.visibility_mask.cpu().to(torch.float32)[..., None]
    return torch.cat([j, conf, vis], dim=-1).numpy()


def unpack_pseudo(arr: np.ndarray) -> Pose2DSet:
    if arr.ndim != 4 or arr.shape[-1] != 4:
        raise FormatError(f"pseudo 2D blob must be (C, P, J, 4), got {arr.shape}")
    t = torch.from_numpy(arr)
    return Pose2DSet(joints=t[..., :2].clone(), confidence=t[..., 2].clone(), visibility_mask=t[..., 3] > 0.5)


def read_cameras(path: Path) -> List[CameraCalibration]:
    """Cameras from calibration.json or from a scene / root-dataset manifest"""
    path = Path(path)
    if path.is_dir():
        path = path / CALIBRATION_FILE
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read calibration from {path}: {e}") from e
    if isinstance(data, dict):
        data = data.get("cameras")
        if data is None:
            raise FormatError(f"{path} has no cameras")
    return _cameras_adapter.validate_python(data)


class FileSceneRepository(AbstractSceneRepository):
    def __init__(self, root: Path):
        self.root = Path(root)

    def _blob(self, name: str) -> Path:
        return self.root / BLOB_DIR / name

    def save_scene(self, scene: SyntheticScene) -> None:
        (self.root / BLOB_DIR).mkdir(parents=True, exist_ok=True)
        entries = []
        for frame in scene.frames:
            gt_name = f"frame_{frame.id:05d}_gt.spt"
            pseudo_name = f"frame_{frame.id:05d}_pseudo.spt"
            image_names = [f"frame_{frame.id:05d}_view{c}.spt" for c in range(len(scene.cams))]
            write_blob(self._blob(gt_name), frame.gt_poses.joints)
            write_blob(self._blob(pseudo_name), pack_pseudo(frame.pseudo_2d))
            for c, name in enumerate(image_names):
                write_blob(self._blob(name), frame.images[c])
            entries.append(
                FrameEntry(
                    id=frame.id,
                    gt_poses_blob=f"{BLOB_DIR}/{gt_name}",
                    pseudo_2d_blob=f"{BLOB_DIR}/{pseudo_name}",
                    image_blobs=[f"{BLOB_DIR}/{n}" for n in image_names],
                )
            )
        manifest = SceneManifest(
            skeleton=scene.skeleton, cameras=scene.cams, frames=entries, workspace=scene.workspace, seed=scene.seed
        )
        (self.root / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2))
        (self.root / CALIBRATION_FILE).write_text(_cameras_adapter.dump_json(scene.cams, indent=2).decode())
        logger.info(f"Saved scene with {len(entries)} frames to {self.root}")

    def _manifest(self) -> SceneManifest:
        path = self.root / MANIFEST_FILE
        if not path.is_file():
            raise FormatError(f"no scene manifest at {path}")
        try:
            return SceneManifest.model_validate_json(path.read_text())
        except ValidationError as e:
            raise FormatError(f"invalid scene manifest {path}: {e}") from e

    def load_cameras(self) -> List[CameraCalibration]:
        return self._manifest().cameras

    def load_scene(self) -> SyntheticScene:
        manifest = self._manifest()
        frames = []
        for entry in manifest.frames:
            gt = torch.from_numpy(read_blob(self.root / entry.gt_poses_blob))
            images = np.stack([read_blob(self.root / name) for name in entry.image_blobs])
            frames.append(
                SceneFrame(
                    id=entry.id,
                    gt_poses=Pose3DSet(joints=gt, person_ids=list(range(gt.shape[0]))),
                    images=images,
                    pseudo_2d=unpack_pseudo(read_blob(self.root / entry.pseudo_2d_blob)),
                )
            )
        logger.info(f"Loaded scene with {len(frames)} frames from {self.root}")
        return SyntheticScene(
            cams=manifest.cameras,
            skeleton=manifest.skeleton,
            frames=frames,
            workspace=manifest.workspace,
            seed=manifest.seed,
        )
