"""
Test cases for Gaussian heatmap rendering and soft-argmax decoding.
"""

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from domain.errors import InvalidBeta, InvalidSigma, ShapeMismatch
from domain.models.camera import VoxelGridSpec
from domain.models.poses import Pose2DSet
from domain.services.rendering import (
    decode_volume_poses,
    render_gaussian_heatmap,
    render_gaussian_heatmaps,
    render_pose_heatmaps,
    soft_argmax_3d,
)

GRID = VoxelGridSpec(center=(0.0, 0.0, 1000.0), extent=(800.0, 800.0, 800.0), resolution=(9, 9, 9))


class TestGaussianHeatmap:
    """Test single-channel Gaussian rendering"""

    def test_peak_at_integer_pixel(self):
        """Test that a unit joint at (10, 12) peaks there with value 1"""
        hm = render_gaussian_heatmap(torch.tensor([[10.0, 12.0]], dtype=torch.float64), (32, 32), sigma=2.0)
        assert hm[12, 10].item() == pytest.approx(1.0)
        assert torch.argmax(hm).item() == 12 * 32 + 10

    def test_symmetric_about_peak(self):
        """Test the mirror symmetry of a centered Gaussian"""
        hm = render_gaussian_heatmap(torch.tensor([[10.0, 12.0]], dtype=torch.float64), (32, 32), sigma=2.0)
        for d in range(1, 5):
            assert hm[12, 10 + d].item() == pytest.approx(hm[12, 10 - d].item())
            assert hm[12 + d, 10].item() == pytest.approx(hm[12 - d, 10].item())

    def test_empty_joint_list(self):
        """Test that no joints render an all-zero heatmap"""
        hm = render_gaussian_heatmap(torch.zeros((0, 2), dtype=torch.float64), (16, 20))
        assert hm.shape == (16, 20)
        assert torch.count_nonzero(hm) == 0

    def test_weight_scales_amplitude(self):
        """Test that the joint weight is the peak value"""
        hm = render_gaussian_heatmap(
            torch.tensor([[5.0, 5.0]], dtype=torch.float64), (16, 16), weights=torch.tensor([0.4], dtype=torch.float64)
        )
        assert hm.max().item() == pytest.approx(0.4)

    def test_window_truncates_tails(self):
        """Test that values beyond three sigmas are dropped and kept without a window"""
        joint = torch.tensor([[2.0, 2.0]], dtype=torch.float64)
        windowed = render_gaussian_heatmap(joint, (32, 32), sigma=1.0)
        exact = render_gaussian_heatmap(joint, (32, 32), sigma=1.0, window=None)
        assert windowed[2, 6].item() == 0.0
        assert exact[2, 6].item() > 0.0

    def test_window_matches_exact_inside(self):
        """Test that windowed rendering equals the exact Gaussian within three sigmas and is zero beyond"""
        joints = torch.tensor([[[3.3, 17.6], [20.5, 9.25]], [[-1.5, 0.5], [31.0, 23.7]]], dtype=torch.float64)
        weights = torch.tensor([[1.0, 0.6], [0.8, 1.0]], dtype=torch.float64)
        windowed = render_gaussian_heatmaps(joints, weights, (24, 32), 1.5)
        exact = render_gaussian_heatmaps(joints, weights, (24, 32), 1.5, window=None)
        ys, xs = torch.meshgrid(torch.arange(24.0), torch.arange(32.0), indexing="ij")
        dx = (xs - joints[..., 0, None, None]).abs()
        dy = (ys - joints[..., 1, None, None]).abs()
        near = ((dx <= 4.5) & (dy <= 4.5)).any(dim=-3)
        assert torch.allclose(windowed[near], exact[near], rtol=1e-12, atol=1e-15)
        assert torch.count_nonzero(windowed[~near]) == 0

    def test_invalid_sigma(self):
        """Test that sigma must be positive"""
        with pytest.raises(InvalidSigma):
            render_gaussian_heatmap(torch.tensor([[1.0, 1.0]]), (8, 8), sigma=0.0)

    def test_shape_mismatch(self):
        """Test that joints and weights must agree"""
        with pytest.raises(ShapeMismatch):
            render_gaussian_heatmaps(torch.zeros((3, 2)), torch.ones(2), (8, 8), 2.0)

    def test_invalid_joints_contribute_nothing(self):
        """Test the valid mask of batched rendering"""
        joints = torch.tensor([[4.0, 4.0], [10.0, 10.0]], dtype=torch.float64)
        hm = render_gaussian_heatmaps(
            joints, torch.ones(2, dtype=torch.float64), (16, 16), 2.0, valid=torch.tensor([True, False])
        )
        assert hm[4, 4].item() == pytest.approx(1.0)
        assert hm[10, 10].item() == 0.0


class TestPoseHeatmaps:
    """Test per-view, per-joint rendering of 2D pose sets"""

    def test_one_peak_per_channel(self):
        """Test that each channel peaks at the joint position divided by four"""
        joints = torch.tensor([[[[40.0, 20.0], [80.0, 100.0], [12.0, 60.0]]]], dtype=torch.float64)
        y = Pose2DSet.from_joints(joints, [(128, 128)])
        H = render_pose_heatmaps(y, (32, 32), sigma=2.0)
        assert H.data.shape == (1, 3, 32, 32)
        for j, (u, v) in enumerate(joints[0, 0].tolist()):
            x, yq = int(u / 4), int(v / 4)
            assert torch.argmax(H.data[0, j]).item() == yq * 32 + x
            assert H.data[0, j].max().item() == pytest.approx(1.0)

    def test_coinciding_joints_stay_below_one(self):
        """Test that overlapping persons combine by maximum"""
        joints = torch.tensor([[[[40.0, 40.0]], [[40.0, 40.0]]]], dtype=torch.float64)
        y = Pose2DSet.from_joints(joints, [(128, 128)])
        H = render_pose_heatmaps(y, (32, 32), sigma=2.0)
        assert H.data.max().item() <= 1.0 + 1e-12

    def test_invisible_joint_is_not_rendered(self):
        """Test that joints outside the image leave the channel empty"""
        joints = torch.tensor([[[[-50.0, 40.0]]]], dtype=torch.float64)
        y = Pose2DSet.from_joints(joints, [(128, 128)])
        H = render_pose_heatmaps(y, (32, 32), sigma=2.0)
        assert torch.count_nonzero(H.data) == 0


class TestSoftArgmax:
    """Test soft-argmax decoding of score volumes"""

    def test_one_hot_volume(self):
        """Test that a sharply peaked volume decodes to its voxel center"""
        volume = torch.zeros(GRID.resolution, dtype=torch.float64)
        volume[2, 7, 4] = 1.0
        x = soft_argmax_3d(volume, GRID, beta=200.0)
        assert x.numpy() == pytest.approx(GRID.voxel_center((2, 7, 4)), abs=GRID.pitch.max() / 2)

    def test_uniform_volume(self):
        """Test that a uniform volume decodes to the grid center"""
        x = soft_argmax_3d(torch.zeros(GRID.resolution, dtype=torch.float64), GRID)
        assert x.tolist() == pytest.approx(list(GRID.center), abs=1e-9)

    def test_two_equal_peaks(self):
        """Test that two equal peaks decode to their midpoint for any beta"""
        a, b = (1, 2, 3), (7, 6, 5)
        volume = torch.zeros(GRID.resolution, dtype=torch.float64)
        volume[a] = 5.0
        volume[b] = 5.0
        mid = (GRID.voxel_center(a) + GRID.voxel_center(b)) / 2.0
        for beta in (0.1, 1.0, 10.0, 1000.0):
            x = soft_argmax_3d(volume, GRID, beta=beta)
            assert x.numpy() == pytest.approx(mid, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1), st.floats(min_value=0.1, max_value=500.0))
    def test_stays_inside_grid(self, seed, beta):
        """Test that the decoded point is a convex combination of voxel centers"""
        g = torch.Generator().manual_seed(seed)
        volume = torch.randn(GRID.resolution, dtype=torch.float64, generator=g)
        x = soft_argmax_3d(volume, GRID, beta=beta).numpy()
        assert (x >= GRID.lower - 1e-9).all()
        assert (x <= GRID.upper + 1e-9).all()

    def test_invalid_beta(self):
        """Test that beta must be positive"""
        with pytest.raises(InvalidBeta):
            soft_argmax_3d(torch.zeros(GRID.resolution), GRID, beta=0.0)

    def test_grid_mismatch(self):
        """Test that the volume must match the grid"""
        with pytest.raises(ShapeMismatch):
            soft_argmax_3d(torch.zeros((4, 4, 4)), GRID)


class TestDecodeVolumePoses:
    """Test per-joint decoding of joint volumes"""

    def test_identical_volumes(self):
        """Test that identical one-hot volumes decode to identical joints"""
        volume = torch.zeros(GRID.resolution, dtype=torch.float64)
        volume[4, 4, 4] = 1.0
        pose = decode_volume_poses(volume.expand(5, *GRID.resolution), GRID, beta=300.0)
        assert pose.shape == (5, 3)
        assert torch.allclose(pose, pose[0].expand(5, 3))

    def test_rejects_wrong_rank(self):
        """Test that joint volumes must be four-dimensional"""
        with pytest.raises(ShapeMismatch):
            decode_volume_poses(torch.zeros(GRID.resolution), GRID)
