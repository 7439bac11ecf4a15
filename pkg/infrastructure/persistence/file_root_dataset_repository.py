"""
Directory-backed store for the synthetic root dataset.
"""

import logging
from pathlib import Path
from typing import List, Sequence

import torch
from pydantic import ValidationError

from application.interfaces.root_dataset_repository import AbstractRootDatasetRepository
from domain.errors import EmptyDataset, FormatError
from domain.models.camera import CameraCalibration
from domain.models.manifest import RootDatasetManifest, RootSampleEntry
from domain.models.scene import SyntheticRootSample
from domain.models.volumes import RootHeatmapSet
from infrastructure.persistence.file_scene_repository import BLOB_DIR, MANIFEST_FILE
from infrastructure.persistence.tensor_blob import read_blob, write_blob

logger = logging.getLogger(__name__)


class FileRootDatasetRepository(AbstractRootDatasetRepository):
    def __init__(self, root: Path):
        self.root = Path(root)

    def save_samples(
        self, samples: Sequence[SyntheticRootSample], cams: Sequence[CameraCalibration], seed: int
    ) -> None:
        if not samples:
            raise EmptyDataset("refusing to write an empty root dataset")
        (self.root / BLOB_DIR).mkdir(parents=True, exist_ok=True)
        entries = []
        for i, sample in enumerate(samples):
            volume_name = f"{BLOB_DIR}/root_{i:05d}_volume.spt"
            heatmaps_name = f"{BLOB_DIR}/root_{i:05d}_heatmaps.spt"
            write_blob(self.root / volume_name, sample.gt_root_volume)
            write_blob(self.root / heatmaps_name, sample.root_heatmaps.data)
            entries.append(
                RootSampleEntry(
                    id=i, gt_root_volume_blob=volume_name, root_heatmaps_blob=heatmaps_name, roots=sample.roots
                )
            )
        manifest = RootDatasetManifest(cameras=list(cams), grid=samples[0].grid, samples=entries, seed=seed)
        (self.root / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2))
        logger.info(f"Saved {len(entries)} root samples to {self.root}")

    def _manifest(self) -> RootDatasetManifest:
        path = self.root / MANIFEST_FILE
        if not path.is_file():
            raise FormatError(f"no root dataset manifest at {path}")
        try:
            return RootDatasetManifest.model_validate_json(path.read_text())
        except ValidationError as e:
            raise FormatError(f"invalid root dataset manifest {path}: {e}") from e

    def load_cameras(self) -> List[CameraCalibration]:
        return self._manifest().cameras

    def load_samples(self) -> List[SyntheticRootSample]:
        manifest = self._manifest()
        return [
            SyntheticRootSample(
                gt_root_volume=torch.from_numpy(read_blob(self.root / e.gt_root_volume_blob)),
                root_heatmaps=RootHeatmapSet(data=torch.from_numpy(read_blob(self.root / e.root_heatmaps_blob))),
                roots=e.roots,
                grid=manifest.grid,
            )
            for e in manifest.samples
        ]
