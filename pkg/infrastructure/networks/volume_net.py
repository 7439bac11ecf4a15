"""
3D U-shaped networks over voxel volumes: root_net and pose_net_3d.
"""

from typing import Dict

import torch
import torch.nn as nn
import torch.nn.functional as F

from domain.errors import ShapeMismatch
from infrastructure.networks.base import SIGMOID_HEAD_BIAS, TrainableFunction, conv_block_3d, init_weights


class VolumeUNet3D(nn.Module):
    """Three resolution levels with skip connections; preserves spatial shape"""

    def __init__(self, in_channels: int, out_channels: int, width: int):
        super().__init__()
        self.inc = conv_block_3d(in_channels, width)
        self.down1 = conv_block_3d(width, 2 * width, stride=2)
        self.down2 = conv_block_3d(2 * width, 4 * width, stride=2)
        self.up1 = conv_block_3d(4 * width + 2 * width, 2 * width)
        self.up2 = conv_block_3d(2 * width + width, width)
        self.head = nn.Conv3d(width, out_channels, kernel_size=1)

    @staticmethod
    def _up(x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x, size=skip.shape[-3:], mode="trilinear", align_corners=False)
        return torch.cat([x, skip], dim=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        e0 = self.inc(x)
        e1 = self.down1(e0)
        e2 = self.down2(e1)
        d1 = self.up1(self._up(e2, e1))
        d0 = self.up2(self._up(d1, e0))
        return self.head(d0)


class RootNet(TrainableFunction):
    """Root feature volume (C_in, X, Y, Z) to a root score volume (X, Y, Z) in [0, 1].

    With bypass set the input is passed through (channel max, clamped), which
    turns the localizer into an oracle path for exact heatmaps.
    """

    def __init__(self, in_channels: int = 1, width: int = 16):
        super().__init__()
        self.in_channels = in_channels
        self.width = width
        self.bypass = False
        self.net = VolumeUNet3D(in_channels, 1, width)
        init_weights(self)
        nn.init.constant_(self.net.head.bias, SIGMOID_HEAD_BIAS)

    def forward(self, volume: torch.Tensor) -> torch.Tensor:
        x, squeeze = self._batched(volume, 4, "root_net")
        if x.shape[1] != self.in_channels:
            raise ShapeMismatch(f"root_net expects {self.in_channels} channels, got {x.shape[1]}")
        if self.bypass:
            out = x.amax(dim=1).clamp(0.0, 1.0)
        else:
            out = torch.sigmoid(self.net(x))[:, 0]
        return out[0] if squeeze else out

    def architecture(self) -> Dict[str, object]:
        return {"in_channels": self.in_channels, "width": self.width}


class PoseNet3D(TrainableFunction):
    """Per-person feature volume (J, Xf, Yf, Zf) to unbounded joint volumes of the same shape"""

    def __init__(self, num_joints: int, width: int = 16):
        super().__init__()
        self.num_joints = num_joints
        self.width = width
        self.bypass = False
        self.net = VolumeUNet3D(num_joints, num_joints, width)
        init_weights(self)

    def forward(self, volume: torch.Tensor) -> torch.Tensor:
        x, squeeze = self._batched(volume, 4, "pose_net_3d")
        if x.shape[1] != self.num_joints:
            raise ShapeMismatch(f"pose_net_3d expects {self.num_joints} channels, got {x.shape[1]}")
        out = x if self.bypass else self.net(x)
        return out[0] if squeeze else out

    def architecture(self) -> Dict[str, object]:
        return {"num_joints": self.num_joints, "width": self.width}
