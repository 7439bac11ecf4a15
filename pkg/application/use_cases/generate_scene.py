"""
Use Case: Generate a synthetic multi-view scene and store it.
"""

import logging
from typing import List, Optional, Sequence

from tqdm import tqdm

from application.interfaces.scene_repository import AbstractSceneRepository
from application.utils.seeding import derive_seed, numpy_rng
from domain.models.camera import CameraCalibration, Workspace
from domain.models.poses import SkeletonSpec
from domain.models.scene import NoisePreset, PseudoNoiseModel, SceneFrame, SyntheticScene
from infrastructure.synthesis.camera_rig import make_camera_rig
from infrastructure.synthesis.image_renderer import render_scene_images
from infrastructure.synthesis.pseudo_detector import simulate_pseudo_2d
from infrastructure.synthesis.skeleton import sample_poses

logger = logging.getLogger(__name__)


def generate_frame(
    frame_id: int,
    n_persons: int,
    cams: Sequence[CameraCalibration],
    skeleton: SkeletonSpec,
    workspace: Workspace,
    noise: PseudoNoiseModel,
    seed: int,
) -> SceneFrame:
    """One frame; all of its randomness derives from (seed, frame_id)"""
    frame_seed = derive_seed(seed, "frame", frame_id)
    poses = sample_poses(skeleton, n_persons, workspace, numpy_rng(frame_seed, "poses"))
    return SceneFrame(
        id=frame_id,
        gt_poses=poses,
        images=render_scene_images(poses, cams, seed=numpy_rng(frame_seed, "images"), skeleton=skeleton),
        pseudo_2d=simulate_pseudo_2d(poses, cams, noise, numpy_rng(frame_seed, "pseudo")),
    )


def generate_scene(
    n_frames: int,
    n_persons: int,
    n_views: int,
    seed: int = 0,
    noise: Optional[PseudoNoiseModel] = None,
    skeleton: Optional[SkeletonSpec] = None,
    workspace: Optional[Workspace] = None,
    cams: Optional[List[CameraCalibration]] = None,
    show_progress: bool = False,
) -> SyntheticScene:
    """A rig of n_views cameras and n_frames frames of n_persons each"""
    skeleton = skeleton or SkeletonSpec()
    workspace = workspace or Workspace()
    noise = noise or PseudoNoiseModel()
    cams = cams or make_camera_rig(n_views, workspace, seed=seed)
    frames = [
        generate_frame(i, n_persons, cams, skeleton, workspace, noise, seed)
        for i in tqdm(range(n_frames), desc="frames", disable=not show_progress)
    ]
    return SyntheticScene(cams=cams, skeleton=skeleton, frames=frames, workspace=workspace, seed=seed)


class GenerateSceneUseCase:
    def __init__(self, scene_repo: AbstractSceneRepository):
        self.scene_repo = scene_repo

    def execute(
        self,
        n_frames: int,
        n_persons: int,
        n_views: int,
        seed: int = 0,
        noise_preset: NoisePreset = NoisePreset.DEFAULT,
        show_progress: bool = False,
    ) -> SyntheticScene:
        logger.info(
            f"Executing GenerateSceneUseCase: {n_frames} frames, {n_persons} persons, {n_views} views, "
            f"noise {noise_preset.value}, seed {seed}"
        )
        scene = generate_scene(
            n_frames,
            n_persons,
            n_views,
            seed=seed,
            noise=PseudoNoiseModel.from_preset(noise_preset),
            show_progress=show_progress,
        )
        self.scene_repo.save_scene(scene)
        return scene
