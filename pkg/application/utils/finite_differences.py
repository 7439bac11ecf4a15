"""
Central finite differences for checking autograd gradients of float64 kernels.
"""

from typing import Callable

import torch

from application.utils.seeding import torch_generator

TensorFn = Callable[[torch.Tensor], torch.Tensor]


def numerical_gradient(fn: TensorFn, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Gradient of a scalar function by central differences, one element at a time"""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat, gflat = x.view(-1), grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + eps
            hi = float(fn(x))
            flat[i] = orig - eps
            lo = float(fn(x))
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def gradient_relative_error(fn: TensorFn, x: torch.Tensor, eps: float = 1e-6, seed: int = 0) -> float:
    """Relative L2 gap between autograd and finite-difference gradients.

    Tensor-valued functions are reduced to a scalar with fixed random weights,
    so every output element takes part in the comparison.
    """
    x = x.detach().to(torch.float64)
    out = fn(x)
    weights = torch.randn(out.shape, dtype=torch.float64, generator=torch_generator(seed, "fd-weights"))

    def scalar(z: torch.Tensor) -> torch.Tensor:
        return (fn(z) * weights).sum()

    leaf = x.clone().requires_grad_(True)
    analytic = torch.autograd.grad(scalar(leaf), leaf, allow_unused=True)[0]
    if analytic is None:
        analytic = torch.zeros_like(x)
    numeric = numerical_gradient(scalar, x, eps)
    scale = max(float(numeric.norm()), float(analytic.norm()))
    if scale < 1e-12:
        return 0.0
    return float((analytic - numeric).norm()) / scale
