"""
Test cases for camera geometry: projection, affine maps, unprojection and triangulation.
"""

import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from domain.errors import BehindCamera, DegenerateConfiguration, ShapeMismatch, SingularTransform
from domain.models.camera import AffineAugmentation, CameraCalibration, VoxelGridSpec
from domain.models.volumes import HeatmapSet
from domain.services.geometry import (
    apply_affine,
    invert_affine,
    project_point,
    project_points,
    triangulate_dlt,
    unproject_heatmaps,
    voxel_centers,
)
from domain.services.rendering import render_gaussian_heatmap


def homogeneous_projection(cam: CameraCalibration, x: np.ndarray) -> np.ndarray:
    p = cam.projection_matrix() @ np.append(x, 1.0)
    return p[:2] / p[2]


def affine_oracle(rotation_deg: float, scale: float, pivot, uv) -> np.ndarray:
    theta = math.radians(rotation_deg)
    f = 1.0 + scale
    to_origin = np.array([[1.0, 0.0, -pivot[0]], [0.0, 1.0, -pivot[1]], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, pivot[0]], [0.0, 1.0, pivot[1]], [0.0, 0.0, 1.0]])
    rot = np.array([[math.cos(theta), -math.sin(theta), 0.0], [math.sin(theta), math.cos(theta), 0.0], [0, 0, 1.0]])
    scl = np.diag([f, f, 1.0])
    return (back @ rot @ scl @ to_origin @ np.array([uv[0], uv[1], 1.0]))[:2]


class TestCameraCalibration:
    """Test calibration invariants"""

    def test_rejects_non_rotation(self, simple_camera):
        """Test that a scaled rotation matrix is rejected"""
        data = simple_camera.model_dump()
        data["R"] = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        with pytest.raises(ValidationError, match="proper rotation"):
            CameraCalibration(**data)

    def test_rejects_distortion(self, simple_camera):
        """Test that non-zero lens distortion is rejected"""
        data = simple_camera.model_dump()
        data["distortion"] = [0.1, 0.0, 0.0, 0.0, 0.0]
        with pytest.raises(ValidationError, match="distortion"):
            CameraCalibration(**data)

    def test_accepts_zero_distortion(self, simple_camera):
        """Test that an all-zero distortion vector is accepted"""
        data = simple_camera.model_dump()
        data["distortion"] = [0.0, 0.0, 0.0, 0.0, 0.0]
        assert CameraCalibration(**data).distortion == [0.0] * 5

    def test_heatmap_size_is_quarter_resolution(self, simple_camera):
        """Test the heatmap size of a 256x256 camera"""
        assert simple_camera.heatmap_size == (64, 64)

    def test_center_of_rig_camera(self, rig):
        """Test that the camera center maps to the origin of the camera frame"""
        cam = rig[0]
        R = np.asarray(cam.R)
        assert R @ cam.center() + np.asarray(cam.t) == pytest.approx(np.zeros(3), abs=1e-9)


class TestProjection:
    """Test pinhole projection"""

    def test_principal_point_ray(self, simple_camera):
        """Test that a point on the optical axis lands on the principal point"""
        uv = project_point(simple_camera, [0.0, 0.0, 2000.0])
        assert uv.tolist() == pytest.approx([128.0, 128.0])

    def test_lateral_offset(self, simple_camera):
        """Test u = f * X / Z + cx"""
        uv = project_point(simple_camera, [200.0, 0.0, 2000.0])
        assert uv.tolist() == pytest.approx([228.0, 128.0])

    def test_matches_homogeneous_oracle(self, rig, rng):
        """Test random points against the full 3x4 projection matrix"""
        for cam in rig:
            for _ in range(20):
                x = rng.uniform([-2000, -2000, 0], [2000, 2000, 2000])
                uv = project_point(cam, x).numpy()
                assert uv == pytest.approx(homogeneous_projection(cam, x), abs=1e-9)

    def test_behind_camera(self, simple_camera):
        """Test that points at or behind the camera plane raise BehindCamera"""
        with pytest.raises(BehindCamera):
            project_point(simple_camera, [0.0, 0.0, -10.0])
        with pytest.raises(BehindCamera):
            project_point(simple_camera, [5.0, 5.0, 0.0])

    def test_batched_depth(self, simple_camera):
        """Test that batched projection reports camera-frame depth"""
        x = torch.tensor([[0.0, 0.0, 1000.0], [0.0, 0.0, -500.0]], dtype=torch.float64)
        _, depth = project_points(simple_camera, x)
        assert depth.tolist() == [1000.0, -500.0]

    def test_rejects_non_vector(self, simple_camera):
        """Test the shape check of single-point projection"""
        with pytest.raises(ShapeMismatch):
            project_point(simple_camera, [[0.0, 0.0, 1000.0]])


class TestAffine:
    """Test image-space affine augmentations"""

    def test_identity(self):
        """Test that the identity leaves pixels unchanged"""
        uv = apply_affine(AffineAugmentation.identity(), [50.0, 70.0])
        assert uv.tolist() == pytest.approx([50.0, 70.0])

    def test_half_turn_reflects_about_pivot(self):
        """Test that a 180 degree rotation is a point reflection about the pivot"""
        t = AffineAugmentation(rotation_deg=180.0, scale=0.0, pivot=(128.0, 128.0))
        uv = apply_affine(t, [138.0, 128.0])
        assert uv.tolist() == pytest.approx([118.0, 128.0], abs=1e-9)

    def test_matches_matrix_composition(self):
        """Test rotation plus scaling against a 3x3 homogeneous composition"""
        t = AffineAugmentation(rotation_deg=30.0, scale=0.2, pivot=(128.0, 128.0))
        uv = apply_affine(t, [40.0, 90.0]).numpy()
        assert uv == pytest.approx(affine_oracle(30.0, 0.2, (128.0, 128.0), (40.0, 90.0)), abs=1e-9)

    def test_invert_identity(self):
        """Test that the inverse of the identity is the identity"""
        inv = invert_affine(AffineAugmentation.identity((10.0, 20.0)))
        assert inv.rotation_deg == 0.0
        assert inv.scale == 0.0
        assert inv.pivot == (10.0, 20.0)

    def test_invert_pure_scale(self):
        """Test that doubling inverts to halving about the same pivot"""
        inv = invert_affine(AffineAugmentation(rotation_deg=0.0, scale=1.0, pivot=(64.0, 64.0)))
        assert 1.0 + inv.scale == pytest.approx(0.5)
        assert inv.pivot == (64.0, 64.0)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(min_value=-45.0, max_value=45.0),
        st.floats(min_value=-0.35, max_value=0.35),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_round_trip(self, rotation, scale, seed):
        """Test that t^-1(t(p)) = p for random transforms and points"""
        t = AffineAugmentation(rotation_deg=rotation, scale=scale, pivot=(128.0, 128.0))
        pts = torch.as_tensor(np.random.default_rng(seed).uniform(0, 256, size=(100, 2)))
        back = apply_affine(invert_affine(t), apply_affine(t, pts))
        assert torch.max(torch.abs(back - pts)).item() < 1e-6

    def test_collapsed_scale_is_singular(self):
        """Test that a scale offset of -1 cannot be constructed"""
        with pytest.raises(ValidationError):
            AffineAugmentation(rotation_deg=0.0, scale=-1.0)

    def test_singular_error_is_a_value_error(self):
        """Test the error hierarchy of singular transforms"""
        assert issubclass(SingularTransform, ValueError)


class TestVoxelGrid:
    """Test voxel grid geometry"""

    def test_centers_span_the_extent(self, coarse_grid):
        """Test that the first and last voxel centers sit on the grid bounds"""
        centers = voxel_centers(coarse_grid)
        assert centers.shape == (12, 12, 5, 3)
        assert centers[0, 0, 0].numpy() == pytest.approx(coarse_grid.lower)
        assert centers[-1, -1, -1].numpy() == pytest.approx(coarse_grid.upper)

    def test_pitch(self, coarse_grid):
        """Test the spacing between adjacent voxel centers"""
        centers = voxel_centers(coarse_grid)
        step = (centers[1, 1, 1] - centers[0, 0, 0]).numpy()
        assert step == pytest.approx(coarse_grid.pitch)

    def test_rejects_single_voxel_axis(self):
        """Test that every axis needs at least two voxels"""
        with pytest.raises(ValidationError):
            VoxelGridSpec(center=(0.0, 0.0, 0.0), extent=(1.0, 1.0, 1.0), resolution=(1, 4, 4))


class TestUnprojection:
    """Test heatmap unprojection into feature volumes"""

    def test_zero_heatmaps(self, rig, coarse_grid):
        """Test that all-zero heatmaps give an all-zero volume"""
        H = HeatmapSet(data=torch.zeros((5, 2, 64, 64), dtype=torch.float64))
        F = unproject_heatmaps(H, rig, coarse_grid, AffineAugmentation.identity((128.0, 128.0)))
        assert F.data.shape == (2, 12, 12, 5)
        assert torch.count_nonzero(F.data) == 0

    def test_peak_at_rendered_voxel(self, rig, coarse_grid):
        """Test that Gaussians rendered at a voxel's projections peak at that voxel"""
        index = (5, 6, 2)
        v0 = coarse_grid.voxel_center(index)
        maps = []
        for cam in rig:
            uv = project_point(cam, v0) / 4.0
            maps.append(render_gaussian_heatmap(uv[None], cam.heatmap_size, sigma=3.0))
        H = HeatmapSet(data=torch.stack(maps)[:, None])
        F = unproject_heatmaps(H, rig, coarse_grid, AffineAugmentation.identity((128.0, 128.0)))
        flat = int(torch.argmax(F.data[0]))
        assert np.unravel_index(flat, coarse_grid.resolution) == index

    def test_linear_without_clamp(self, rig, coarse_grid):
        """Test that the unclamped unprojection is linear in the heatmaps"""
        g = torch.Generator().manual_seed(5)
        H1 = torch.rand((5, 1, 64, 64), dtype=torch.float64, generator=g)
        H2 = torch.rand((5, 1, 64, 64), dtype=torch.float64, generator=g)
        t = AffineAugmentation(rotation_deg=10.0, scale=0.1, pivot=(128.0, 128.0))

        def unproject(data):
            return unproject_heatmaps(HeatmapSet(data=data), rig, coarse_grid, t, clamp=False).data

        mixed = unproject(0.3 * H1 + 0.5 * H2)
        assert torch.allclose(mixed, 0.3 * unproject(H1) + 0.5 * unproject(H2), atol=1e-12)

    def test_camera_count_mismatch(self, rig, coarse_grid):
        """Test that heatmap views must match the cameras"""
        H = HeatmapSet(data=torch.zeros((4, 1, 64, 64)))
        with pytest.raises(ShapeMismatch):
            unproject_heatmaps(H, rig, coarse_grid, AffineAugmentation.identity())

    def test_resolution_mismatch(self, rig, coarse_grid):
        """Test that heatmaps must be quarter image resolution"""
        H = HeatmapSet(data=torch.zeros((5, 1, 32, 32)))
        with pytest.raises(ShapeMismatch):
            unproject_heatmaps(H, rig, coarse_grid, AffineAugmentation.identity())


class TestTriangulation:
    """Test DLT triangulation"""

    def test_two_views_exact(self, rig):
        """Test that noise-free projections recover the point"""
        X = np.array([300.0, -450.0, 1200.0])
        obs = [(cam, project_point(cam, X).numpy()) for cam in rig[:2]]
        assert triangulate_dlt(obs) == pytest.approx(X, abs=1e-3)

    def test_noisy_five_views(self, rig, rng):
        """Test the median error under one-pixel noise"""
        errors = []
        for _ in range(100):
            X = rng.uniform([-1500, -1500, 200], [1500, 1500, 1800])
            obs = [(cam, project_point(cam, X).numpy() + rng.normal(0.0, 1.0, 2)) for cam in rig]
            errors.append(np.linalg.norm(triangulate_dlt(obs) - X))
        assert np.median(errors) < 30.0

    def test_identical_cameras(self, rig):
        """Test that two identical rays are degenerate"""
        X = np.array([0.0, 0.0, 1000.0])
        uv = project_point(rig[0], X).numpy()
        with pytest.raises(DegenerateConfiguration):
            triangulate_dlt([(rig[0], uv), (rig[0], uv)])

    def test_single_observation(self, rig):
        """Test that one observation is not enough"""
        with pytest.raises(DegenerateConfiguration):
            triangulate_dlt([(rig[0], [10.0, 10.0])])
