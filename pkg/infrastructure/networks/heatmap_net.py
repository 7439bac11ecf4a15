"""
2D networks: the heatmap backbone and the lighter attention network.
"""

from typing import Dict, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from domain.errors import ShapeMismatch
from infrastructure.networks.base import (
    SIGMOID_HEAD_BIAS,
    TrainableFunction,
    conv_block_2d,
    deconv_block_2d,
    init_weights,
)


class Encoder2D(nn.Module):
    """Four stride-2 stages, output at 1/16 resolution"""

    def __init__(self, width: int):
        super().__init__()
        self.width = width
        self.stages = nn.Sequential(
            conv_block_2d(3, width, stride=2),
            conv_block_2d(width, 2 * width, stride=2),
            conv_block_2d(2 * width, 4 * width, stride=2),
            conv_block_2d(4 * width, 4 * width, stride=2),
        )
        self.out_channels = 4 * width

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.stages(x)


class Decoder2D(nn.Module):
    """Two transposed-conv stages back to 1/4 resolution and a sigmoid head"""

    def __init__(self, in_channels: int, width: int, out_channels: int):
        super().__init__()
        self.up = nn.Sequential(deconv_block_2d(in_channels, 2 * width), deconv_block_2d(2 * width, 2 * width))
        self.head = nn.Conv2d(2 * width, out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor, size) -> torch.Tensor:
        x = self.up(x)
        if tuple(x.shape[-2:]) != tuple(size):
            x = F.interpolate(x, size=size, mode="bilinear", align_corners=False)
        return torch.sigmoid(self.head(x))


def _check_images(images: torch.Tensor) -> None:
    if images.shape[-3] != 3:
        raise ShapeMismatch(f"images must have 3 channels, got {tuple(images.shape)}")
    H, W = images.shape[-2:]
    if H % 4 or W % 4:
        raise ShapeMismatch(f"image size {H}x{W} must be divisible by 4")


class HeatmapNet2D(TrainableFunction):
    """Images (N, 3, H, W) or (3, H, W) to per-joint heatmaps in [0, 1] at quarter resolution"""

    def __init__(self, num_joints: int, width: int = 32):
        super().__init__()
        self.num_joints = num_joints
        self.width = width
        self.encoder = Encoder2D(width)
        self.decoder = Decoder2D(self.encoder.out_channels, width, num_joints)
        init_weights(self)
        nn.init.constant_(self.decoder.head.bias, SIGMOID_HEAD_BIAS)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        _check_images(images)
        x, squeeze = self._batched(images, 3, "heatmap_net_2d")
        H, W = x.shape[-2:]
        out = self.decoder(self.encoder(x), (H // 4, W // 4))
        return out[0] if squeeze else out

    def architecture(self) -> Dict[str, object]:
        return {"num_joints": self.num_joints, "width": self.width}


class AttnNet2D(TrainableFunction):
    """Per-joint attention maps A in [0, 1] at quarter resolution.

    By default a separate, half-width copy of the heatmap backbone; with a
    shared encoder only the decoder head is its own.
    """

    def __init__(self, num_joints: int, width: int = 16, shared_encoder: Optional[Encoder2D] = None):
        super().__init__()
        self.num_joints = num_joints
        self.width = width
        self.shared = shared_encoder is not None
        self.encoder = shared_encoder if shared_encoder is not None else Encoder2D(width)
        self.decoder = Decoder2D(self.encoder.out_channels, width, num_joints)
        if self.shared:
            init_weights(self.decoder)
        else:
            init_weights(self)
        nn.init.constant_(self.decoder.head.bias, SIGMOID_HEAD_BIAS)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        _check_images(images)
        x, squeeze = self._batched(images, 3, "attn_net_2d")
        H, W = x.shape[-2:]
        out = self.decoder(self.encoder(x), (H // 4, W // 4))
        return out[0] if squeeze else out

    def own_parameters(self):
        """Parameters this network owns (excludes a shared encoder)"""
        return list(self.decoder.parameters()) if self.shared else list(self.parameters())

    def architecture(self) -> Dict[str, object]:
        return {"num_joints": self.num_joints, "width": self.width, "shared": self.shared}
