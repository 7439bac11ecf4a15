"""
Shared building blocks of the desk-scale networks.
"""

import logging
from typing import Dict, Tuple

import torch
import torch.nn as nn

from domain.errors import ShapeMismatch

logger = logging.getLogger(__name__)

SIGMOID_HEAD_BIAS = -2.0


def _groups(channels: int) -> int:
    for g in (8, 4, 2):
        if channels % g == 0:
            return g
    return 1


def conv_block_2d(in_channels: int, out_channels: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1),
        nn.GroupNorm(_groups(out_channels), out_channels),
        nn.ReLU(inplace=True),
    )


def deconv_block_2d(in_channels: int, out_channels: int) -> nn.Sequential:
    """Doubles spatial size"""
    return nn.Sequential(
        nn.ConvTranspose2d(in_channels, out_channels, kernel_size=4, stride=2, padding=1),
        nn.GroupNorm(_groups(out_channels), out_channels),
        nn.ReLU(inplace=True),
    )


def conv_block_3d(in_channels: int, out_channels: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv3d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1),
        nn.GroupNorm(_groups(out_channels), out_channels),
        nn.ReLU(inplace=True),
    )


def init_weights(module: nn.Module) -> None:
    """Fan-in scaled uniform kernels, zero biases, unit norms"""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Conv3d, nn.ConvTranspose2d, nn.ConvTranspose3d)):
            nn.init.kaiming_uniform_(m.weight, nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.GroupNorm):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


class TrainableFunction(nn.Module):
    """A network that records its architecture for checkpoint headers"""

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def architecture(self) -> Dict[str, object]:
        """Constructor arguments recorded in checkpoint headers"""
        raise NotImplementedError

    @staticmethod
    def _batched(x: torch.Tensor, unbatched_ndim: int, what: str) -> Tuple[torch.Tensor, bool]:
        if x.ndim == unbatched_ndim:
            return x[None], True
        if x.ndim == unbatched_ndim + 1:
            return x, False
        raise ShapeMismatch(f"{what} expects {unbatched_ndim} or {unbatched_ndim + 1} dims, got {tuple(x.shape)}")
