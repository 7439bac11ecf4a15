"""
Sampling and application of the paired image augmentations: one affine
transform per branch shared by all views, plus per-view photometric ops and
cutout boxes that only ever touch pixels.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from domain.models.camera import AffineAugmentation
from domain.models.training import AugmentationConfig
from domain.services.geometry import apply_affine, invert_affine

BRIGHTNESS_RANGE = (-0.1, 0.1)
CONTRAST_RANGE = (0.8, 1.2)
EQUALIZE_PROB = 0.3
EQUALIZE_QUANTILES = (0.02, 0.98)
CUTOUT_FILL = 0.5


@dataclass(frozen=True)
class PhotometricOps:
    brightness: float = 0.0
    contrast: float = 1.0
    equalize: bool = False

    @property
    def is_identity(self) -> bool:
        return self.brightness == 0.0 and self.contrast == 1.0 and not self.equalize


@dataclass(frozen=True)
class Cutout:
    """Square box given by its top-left corner and side, pixels"""

    x: int
    y: int
    size: int


@dataclass
class BranchAugmentation:
    t: AffineAugmentation
    photometric: List[PhotometricOps] = field(default_factory=list)
    cutouts: List[List[Cutout]] = field(default_factory=list)


@dataclass
class AugmentationPair:
    first: BranchAugmentation
    second: BranchAugmentation

    @property
    def t1(self) -> AffineAugmentation:
        return self.first.t

    @property
    def t2(self) -> AffineAugmentation:
        return self.second.t


def _sample_branch(
    config: AugmentationConfig, rng: np.random.Generator, image_size: Tuple[int, int], num_views: int
) -> BranchAugmentation:
    W, H = image_size
    pivot = (W / 2.0, H / 2.0)
    if config.enabled:
        t = AffineAugmentation(
            rotation_deg=float(rng.uniform(config.rotation_deg_min, config.rotation_deg_max)),
            scale=float(rng.uniform(config.scale_min, config.scale_max)),
            pivot=pivot,
        )
    else:
        t = AffineAugmentation.identity(pivot)

    photometric, cutouts = [], []
    for _ in range(num_views):
        if config.photometric:
            photometric.append(
                PhotometricOps(
                    brightness=float(rng.uniform(*BRIGHTNESS_RANGE)),
                    contrast=float(rng.uniform(*CONTRAST_RANGE)),
                    equalize=bool(rng.random() < EQUALIZE_PROB),
                )
            )
        else:
            photometric.append(PhotometricOps())
        boxes = []
        for _ in range(config.cutout_count):
            size = int(rng.integers(config.cutout_size_min, config.cutout_size_max + 1))
            x = int(rng.integers(0, max(W - size, 0) + 1))
            y = int(rng.integers(0, max(H - size, 0) + 1))
            boxes.append(Cutout(x=x, y=y, size=size))
        cutouts.append(boxes)
    return BranchAugmentation(t=t, photometric=photometric, cutouts=cutouts)


def sample_augmentation_pair(
    config: AugmentationConfig, rng: np.random.Generator, image_size: Tuple[int, int], num_views: int
) -> AugmentationPair:
    """Two independent branch augmentations drawn from the configured ranges"""
    return AugmentationPair(
        first=_sample_branch(config, rng, image_size, num_views),
        second=_sample_branch(config, rng, image_size, num_views),
    )


def warp_images(images: torch.Tensor, t: AffineAugmentation) -> torch.Tensor:
    """Resamples (C, 3, H, W) images into the augmented frame; uncovered pixels are zero"""
    if t.is_identity:
        return images
    C, _, H, W = images.shape
    ys, xs = torch.meshgrid(
        torch.arange(H, dtype=torch.float64), torch.arange(W, dtype=torch.float64), indexing="ij"
    )
    src = apply_affine(invert_affine(t), torch.stack([xs, ys], dim=-1))  # (H, W, 2)
    norm = torch.stack([src[..., 0] * 2.0 / (W - 1) - 1.0, src[..., 1] * 2.0 / (H - 1) - 1.0], dim=-1)
    grid = norm.to(images.dtype).to(images.device).expand(C, H, W, 2)
    return F.grid_sample(images, grid, mode="bilinear", padding_mode="zeros", align_corners=True)


def apply_photometric(image: torch.Tensor, ops: PhotometricOps) -> torch.Tensor:
    """Brightness, contrast and an equalization approximation (quantile stretch) on one (3, H, W) image"""
    if ops.is_identity:
        return image
    out = image + ops.brightness
    mean = out.mean()
    out = mean + ops.contrast * (out - mean)
    if ops.equalize:
        flat = out.reshape(out.shape[0], -1)
        q = torch.tensor(EQUALIZE_QUANTILES, dtype=out.dtype, device=out.device)
        lo, hi = torch.quantile(flat, q, dim=1)
        span = (hi - lo).clamp(min=1e-6)
        out = (out - lo[:, None, None]) / span[:, None, None]
    return out.clamp(0.0, 1.0)


def apply_cutouts(image: torch.Tensor, boxes: Sequence[Cutout]) -> torch.Tensor:
    if not boxes:
        return image
    out = image.clone()
    for box in boxes:
        out[:, box.y : box.y + box.size, box.x : box.x + box.size] = CUTOUT_FILL
    return out


def augment_views(images: torch.Tensor, branch: BranchAugmentation) -> torch.Tensor:
    """Affine warp of all views followed by each view's photometric ops and cutouts"""
    warped = warp_images(images, branch.t)
    views = []
    for c in range(warped.shape[0]):
        view = warped[c]
        if c < len(branch.photometric):
            view = apply_photometric(view, branch.photometric[c])
        if c < len(branch.cutouts):
            view = apply_cutouts(view, branch.cutouts[c])
        views.append(view)
    return torch.stack(views)
