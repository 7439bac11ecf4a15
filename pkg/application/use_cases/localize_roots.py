"""
Use Case: Localize person roots from multi-view images or heatmaps.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import torch

from application.utils.augmentation import AugmentationPair, augment_views, warp_images
from domain.errors import IndexOutOfRange
from domain.models.camera import AffineAugmentation, CameraCalibration, VoxelGridSpec
from domain.models.training import RootInput
from domain.models.volumes import HeatmapSet, RootBranch, RootHeatmapSet, RootProposal, RootVolume
from domain.services.geometry import unproject_heatmaps
from domain.services.nms import nms_3d
from infrastructure.networks.bundle import ModelBundle

logger = logging.getLogger(__name__)

HeatmapTriple = Tuple[HeatmapSet, HeatmapSet, HeatmapSet]


def extract_root_heatmaps(H: HeatmapSet, root_channel: int) -> RootHeatmapSet:
    """Slice of the root joint channel"""
    if not 0 <= root_channel < H.num_joints:
        raise IndexOutOfRange(f"root channel {root_channel} outside [0, {H.num_joints})")
    return RootHeatmapSet(data=H.data[:, root_channel])


def root_feature_volume(
    H: HeatmapSet,
    cams: Sequence[CameraCalibration],
    grid: VoxelGridSpec,
    t: AffineAugmentation,
    root_channel: int,
    root_input: RootInput = RootInput.ROOT,
) -> torch.Tensor:
    """(C_in, X, Y, Z) input of root_net: the root channel alone, or every joint channel"""
    if root_input == RootInput.ALL_JOINTS:
        return unproject_heatmaps(H, cams, grid, t).data
    root_set = extract_root_heatmaps(H, root_channel).as_heatmap_set()
    return unproject_heatmaps(root_set, cams, grid, t).data


@dataclass
class RootLocalization:
    G0: RootVolume
    G1: RootVolume
    G2: RootVolume
    proposals: List[RootProposal] = field(default_factory=list)
    heatmaps: Optional[HeatmapTriple] = None


def branch_heatmaps(
    images: torch.Tensor,
    t1: AffineAugmentation,
    t2: AffineAugmentation,
    bundle: ModelBundle,
    augmentation: Optional[AugmentationPair] = None,
) -> HeatmapTriple:
    """heatmap_net_2d on the plain, first-branch and second-branch views"""
    if augmentation is not None:
        x1, x2 = augment_views(images, augmentation.first), augment_views(images, augmentation.second)
    else:
        x1, x2 = warp_images(images, t1), warp_images(images, t2)
    net = bundle.heatmap_net_2d
    return (
        HeatmapSet(data=net(images)),
        HeatmapSet(data=net(x1)),
        HeatmapSet(data=net(x2)),
    )


def root_volumes(
    heatmaps: HeatmapTriple,
    cams: Sequence[CameraCalibration],
    t1: AffineAugmentation,
    t2: AffineAugmentation,
    bundle: ModelBundle,
    grid: Optional[VoxelGridSpec] = None,
) -> Tuple[RootVolume, RootVolume, RootVolume]:
    grid = grid or bundle.coarse_grid
    root = bundle.skeleton.root_index
    mode = bundle.model_config.root_input
    W, H = cams[0].image_size
    t0 = AffineAugmentation.identity((W / 2.0, H / 2.0))
    out = []
    for H_k, t_k, tag in zip(heatmaps, (t0, t1, t2), (RootBranch.G0, RootBranch.G1, RootBranch.G2)):
        F_root = root_feature_volume(H_k, cams, grid, t_k, root, mode)
        G = bundle.root_net(F_root.to(next(bundle.root_net.parameters()).dtype))
        out.append(RootVolume(data=G, grid=grid, branch=tag))
    return out[0], out[1], out[2]


def localize_roots(
    x_views: Union[torch.Tensor, HeatmapTriple],
    cams: Sequence[CameraCalibration],
    t1: AffineAugmentation,
    t2: AffineAugmentation,
    bundle: ModelBundle,
    augmentation: Optional[AugmentationPair] = None,
) -> RootLocalization:
    """Root volumes G0, G1, G2 and the person proposals extracted from G2.

    Args:
        x_views: (C, 3, H, W) images, or heatmaps already computed for the
            plain, first and second branch.
        cams: calibrations of the C views.
        t1, t2: the branch augmentations.
        bundle: networks and grids.
        augmentation: optional full pair (photometric ops, cutouts) matching t1 and t2.
    """
    if isinstance(x_views, torch.Tensor):
        heatmaps = branch_heatmaps(x_views, t1, t2, bundle, augmentation)
    else:
        heatmaps = tuple(x_views)
    G0, G1, G2 = root_volumes(heatmaps, cams, t1, t2, bundle)
    hyper = bundle.hyper
    proposals = nms_3d(G2, hyper.nms_window, hyper.detection_threshold, hyper.max_proposals)
    logger.debug(f"Localized {len(proposals)} root proposals")
    return RootLocalization(G0=G0, G1=G1, G2=G2, proposals=proposals, heatmaps=heatmaps)


def localize_branch(
    H: HeatmapSet,
    cams: Sequence[CameraCalibration],
    bundle: ModelBundle,
    t: Optional[AffineAugmentation] = None,
    branch: RootBranch = RootBranch.G0,
) -> Tuple[RootVolume, List[RootProposal]]:
    """Root volume and proposals of a single branch; t defaults to the unaugmented views"""
    if t is None:
        W, Hh = cams[0].image_size
        t = AffineAugmentation.identity((W / 2.0, Hh / 2.0))
    F_root = root_feature_volume(
        H, cams, bundle.coarse_grid, t, bundle.skeleton.root_index, bundle.model_config.root_input
    )
    G = RootVolume(
        data=bundle.root_net(F_root.to(next(bundle.root_net.parameters()).dtype)),
        grid=bundle.coarse_grid,
        branch=branch,
    )
    hyper = bundle.hyper
    return G, nms_3d(G, hyper.nms_window, hyper.detection_threshold, hyper.max_proposals)


class LocalizeRootsUseCase:
    def __init__(self, bundle: ModelBundle):
        self.bundle = bundle

    def execute(
        self,
        x_views: Union[torch.Tensor, HeatmapTriple],
        cams: Sequence[CameraCalibration],
        t1: AffineAugmentation,
        t2: AffineAugmentation,
    ) -> RootLocalization:
        logger.debug(f"Executing LocalizeRootsUseCase over {len(cams)} views")
        self.bundle.eval()
        with torch.no_grad():
            return localize_roots(x_views, cams, t1, t2, self.bundle)
