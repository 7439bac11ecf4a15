"""
The four networks together with the skeleton, voxel grids and hyper-parameters they were built for.
"""

import logging
from typing import Dict, List, Optional

import torch
import torch.nn as nn

from domain.models.camera import VoxelGridSpec, Workspace
from domain.models.poses import SkeletonSpec
from domain.models.training import GridConfig, HyperParams, ModelConfig, RootInput, StageName
from infrastructure.networks.heatmap_net import AttnNet2D, HeatmapNet2D
from infrastructure.networks.volume_net import PoseNet3D, RootNet

logger = logging.getLogger(__name__)

MAX_PARAMETERS = 2_000_000


class ModelBundle(nn.Module):
    def __init__(
        self,
        skeleton: SkeletonSpec,
        coarse_grid: VoxelGridSpec,
        fine_grid: VoxelGridSpec,
        hyper: HyperParams,
        model_config: ModelConfig,
    ):
        super().__init__()
        J = skeleton.num_joints
        self.skeleton = skeleton
        self.coarse_grid = coarse_grid
        self.fine_grid = fine_grid
        self.hyper = hyper
        self.model_config = model_config

        self.heatmap_net_2d = HeatmapNet2D(J, width=model_config.width_2d)
        root_channels = 1 if model_config.root_input == RootInput.ROOT else J
        self.root_net = RootNet(in_channels=root_channels, width=model_config.width_3d)
        self.pose_net_3d = PoseNet3D(J, width=model_config.width_3d)
        shared = self.heatmap_net_2d.encoder if model_config.attn_shared_backbone else None
        self.attn_net_2d = AttnNet2D(J, width=model_config.width_attn, shared_encoder=shared)

    @property
    def num_joints(self) -> int:
        return self.skeleton.num_joints

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def parameter_report(self) -> Dict[str, int]:
        return {
            "heatmap_net_2d": self.heatmap_net_2d.parameter_count(),
            "root_net": self.root_net.parameter_count(),
            "pose_net_3d": self.pose_net_3d.parameter_count(),
            "attn_net_2d": sum(p.numel() for p in self.attn_net_2d.own_parameters()),
            "total": self.parameter_count(),
        }

    def set_bypass(self, root: bool = False, pose: bool = False) -> None:
        """Identity root_net / pose_net_3d for the oracle paths"""
        self.root_net.bypass = root
        self.pose_net_3d.bypass = pose

    def stage_parameters(
        self, stage: StageName, train_attention: bool = True, freeze_backbone: bool = False
    ) -> List[nn.Parameter]:
        """Parameters the optimizer updates in a stage; root_net only trains in its own stage"""
        if stage == StageName.PRETRAIN:
            return list(self.heatmap_net_2d.parameters())
        if stage == StageName.ROOT:
            return list(self.root_net.parameters())
        params: List[nn.Parameter] = list(self.pose_net_3d.parameters())
        if not freeze_backbone:
            params += list(self.heatmap_net_2d.parameters())
        if train_attention:
            params += self.attn_net_2d.own_parameters()
        seen, unique = set(), []
        for p in params:
            if id(p) not in seen:
                seen.add(id(p))
                unique.append(p)
        return unique

    def architecture(self) -> Dict[str, object]:
        return {
            "skeleton": self.skeleton.model_dump(),
            "coarse_grid": self.coarse_grid.model_dump(),
            "fine_grid": self.fine_grid.model_dump(),
            "hyper": self.hyper.model_dump(by_alias=True),
            "model": self.model_config.model_dump(mode="json"),
        }

    @classmethod
    def from_architecture(cls, arch: Dict[str, object]) -> "ModelBundle":
        return cls(
            skeleton=SkeletonSpec.model_validate(arch["skeleton"]),
            coarse_grid=VoxelGridSpec.model_validate(arch["coarse_grid"]),
            fine_grid=VoxelGridSpec.model_validate(arch["fine_grid"]),
            hyper=HyperParams.model_validate(arch["hyper"]),
            model_config=ModelConfig.model_validate(arch["model"]),
        )


def build_model_bundle(
    skeleton: SkeletonSpec,
    workspace: Workspace,
    model_config: Optional[ModelConfig] = None,
    grid_config: Optional[GridConfig] = None,
    hyper: Optional[HyperParams] = None,
    seed: int = 0,
) -> ModelBundle:
    """Freshly initialized bundle; the coarse grid is centered on the workspace"""
    model_config = model_config or ModelConfig()
    grid_config = grid_config or GridConfig()
    center = tuple(float(c) for c in workspace.center)
    coarse = VoxelGridSpec(center=center, extent=grid_config.coarse_extent, resolution=grid_config.coarse_resolution)
    fine = VoxelGridSpec(center=center, extent=grid_config.fine_extent, resolution=grid_config.fine_resolution)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        bundle = ModelBundle(skeleton, coarse, fine, hyper or HyperParams(), model_config)
    count = bundle.parameter_count()
    logger.info(f"Built model bundle with {count} parameters")
    if count >= MAX_PARAMETERS:
        logger.warning(f"Model bundle has {count} parameters, above the {MAX_PARAMETERS} limit")
    return bundle
