"""
Test cases for the 2D and 3D networks and the model bundle.
"""

import pytest
import torch

from domain.errors import ShapeMismatch
from domain.models.training import ModelConfig, RootInput, StageName
from infrastructure.networks.bundle import MAX_PARAMETERS, ModelBundle, build_model_bundle
from infrastructure.networks.heatmap_net import AttnNet2D, HeatmapNet2D
from infrastructure.networks.volume_net import PoseNet3D, RootNet

TINY = ModelConfig(width_2d=4, width_attn=4, width_3d=4)


def assert_every_parameter_gets_gradient(net: torch.nn.Module, output: torch.Tensor) -> None:
    weights = torch.rand(output.shape, generator=torch.Generator().manual_seed(1))
    (output * weights).sum().backward()
    params = [p for p in net.parameters() if p.requires_grad]
    with_grad = [p for p in params if p.grad is not None and p.grad.abs().sum() > 0]
    assert len(with_grad) >= 0.99 * len(params)


class TestHeatmapNet2D:
    """Test the heatmap backbone"""

    def test_output_shape(self):
        """Test that 256x256 images give 64x64 heatmaps per joint"""
        net = HeatmapNet2D(15, width=8).eval()
        with torch.no_grad():
            out = net(torch.rand(2, 3, 256, 256))
        assert out.shape == (2, 15, 64, 64)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_unbatched_input(self):
        """Test that a single image keeps its unbatched layout"""
        net = HeatmapNet2D(15, width=4).eval()
        with torch.no_grad():
            assert net(torch.rand(3, 64, 64)).shape == (15, 16, 16)

    def test_eval_is_deterministic(self):
        """Test that two eval forwards agree exactly"""
        net = HeatmapNet2D(15, width=4).eval()
        x = torch.rand(1, 3, 64, 64)
        with torch.no_grad():
            assert torch.equal(net(x), net(x))

    def test_gradients_reach_parameters(self):
        """Test that a loss on the heatmaps reaches the parameters"""
        net = HeatmapNet2D(15, width=4)
        assert_every_parameter_gets_gradient(net, net(torch.rand(2, 3, 64, 64)))

    @pytest.mark.parametrize("shape", [(1, 1, 64, 64), (1, 3, 62, 64), (3, 64)])
    def test_rejects_bad_inputs(self, shape):
        """Test channel count, divisibility and rank checks"""
        with pytest.raises(ShapeMismatch):
            HeatmapNet2D(15, width=4)(torch.rand(shape))


class TestAttnNet2D:
    """Test the attention network"""

    def test_output_range(self):
        """Test that attention maps lie in [0, 1] at heatmap resolution"""
        net = AttnNet2D(15, width=4).eval()
        with torch.no_grad():
            out = net(torch.rand(2, 3, 64, 64))
        assert out.shape == (2, 15, 16, 16)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_shared_encoder(self):
        """Test that a shared encoder is not counted among its own parameters"""
        backbone = HeatmapNet2D(15, width=4)
        net = AttnNet2D(15, width=4, shared_encoder=backbone.encoder)
        own = {id(p) for p in net.own_parameters()}
        assert not own & {id(p) for p in backbone.encoder.parameters()}
        assert net.architecture()["shared"] is True


class TestRootNet:
    """Test the root localizer"""

    def test_output_shape_and_range(self):
        """Test that a one-channel volume maps to a score volume in [0, 1]"""
        net = RootNet(1, width=4).eval()
        with torch.no_grad():
            out = net(torch.rand(1, 8, 8, 4))
        assert out.shape == (8, 8, 4)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_gradients_reach_parameters(self):
        """Test that a loss on the root volume reaches the parameters"""
        net = RootNet(1, width=4)
        assert_every_parameter_gets_gradient(net, net(torch.rand(2, 1, 8, 8, 4)))

    def test_bypass(self):
        """Test that the bypass passes the clamped channel maximum through"""
        net = RootNet(2, width=4)
        net.bypass = True
        x = torch.rand(2, 6, 6, 4) * 1.5
        assert torch.equal(net(x), x.amax(dim=0).clamp(0.0, 1.0))

    def test_channel_mismatch(self):
        """Test that the input channel count is checked"""
        with pytest.raises(ShapeMismatch):
            RootNet(1, width=4)(torch.rand(3, 8, 8, 4))


class TestPoseNet3D:
    """Test the per-person joint network"""

    def test_output_shape(self):
        """Test that the joint volumes keep the input shape"""
        net = PoseNet3D(15, width=4).eval()
        with torch.no_grad():
            assert net(torch.rand(15, 6, 6, 6)).shape == (15, 6, 6, 6)

    def test_bypass_is_identity(self):
        """Test the oracle bypass"""
        net = PoseNet3D(15, width=4)
        net.bypass = True
        x = torch.rand(15, 6, 6, 6)
        assert torch.equal(net(x), x)

    def test_gradients_reach_parameters(self):
        """Test that a loss on the joint volumes reaches the parameters"""
        net = PoseNet3D(15, width=4)
        assert_every_parameter_gets_gradient(net, net(torch.rand(2, 15, 6, 6, 6)))

    def test_rejects_wrong_rank(self):
        """Test that six-dimensional inputs are rejected"""
        with pytest.raises(ShapeMismatch):
            PoseNet3D(15, width=4)(torch.rand(1, 1, 15, 6, 6, 6))


class TestModelBundle:
    """Test building, describing and restoring the four networks"""

    def test_default_size_fits_budget(self, skeleton, workspace):
        """Test that the default bundle stays under the parameter limit"""
        bundle = build_model_bundle(skeleton, workspace)
        report = bundle.parameter_report()
        assert report["total"] == bundle.parameter_count() < MAX_PARAMETERS
        assert all(report[name] > 0 for name in ("heatmap_net_2d", "root_net", "pose_net_3d", "attn_net_2d"))

    def test_grids_centered_on_workspace(self, skeleton, workspace):
        """Test that both grids are centered on the workspace"""
        bundle = build_model_bundle(skeleton, workspace, TINY)
        assert bundle.coarse_grid.center == tuple(workspace.center)
        assert bundle.fine_grid.center == tuple(workspace.center)

    def test_seeded_initialization(self, skeleton, workspace):
        """Test that equal seeds give equal weights"""
        a = build_model_bundle(skeleton, workspace, TINY, seed=3).state_dict()
        b = build_model_bundle(skeleton, workspace, TINY, seed=3).state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    def test_from_architecture(self, skeleton, workspace):
        """Test that a bundle rebuilt from its description has the same layout"""
        bundle = build_model_bundle(skeleton, workspace, TINY)
        rebuilt = ModelBundle.from_architecture(bundle.architecture())
        assert rebuilt.architecture() == bundle.architecture()
        assert {k: v.shape for k, v in rebuilt.state_dict().items()} == {
            k: v.shape for k, v in bundle.state_dict().items()
        }

    def test_all_joints_root_input(self, skeleton, workspace):
        """Test that the all-joints root input widens root_net"""
        config = ModelConfig(width_2d=4, width_attn=4, width_3d=4, root_input=RootInput.ALL_JOINTS)
        assert build_model_bundle(skeleton, workspace, config).root_net.in_channels == skeleton.num_joints

    def test_stage_parameters(self, skeleton, workspace):
        """Test which networks each stage trains"""
        bundle = build_model_bundle(skeleton, workspace, TINY)
        ids = lambda params: {id(p) for p in params}  # noqa: E731
        assert ids(bundle.stage_parameters(StageName.PRETRAIN)) == ids(bundle.heatmap_net_2d.parameters())
        assert ids(bundle.stage_parameters(StageName.ROOT)) == ids(bundle.root_net.parameters())
        pose = ids(bundle.stage_parameters(StageName.POSE_L1L2))
        assert ids(bundle.attn_net_2d.parameters()) <= pose
        assert not ids(bundle.root_net.parameters()) & pose
        frozen = ids(bundle.stage_parameters(StageName.POSE_L2, train_attention=False, freeze_backbone=True))
        assert frozen == ids(bundle.pose_net_3d.parameters())
