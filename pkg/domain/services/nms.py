"""
Person proposals from a root volume: 3D non-maximum suppression, thresholding
and sub-voxel center-of-mass refinement.
"""

import logging
from typing import List

import numpy as np
import torch
import torch.nn.functional as F

from domain.models.volumes import RootProposal, RootVolume

logger = logging.getLogger(__name__)


def _refine(values: np.ndarray, index: tuple, pitch: np.ndarray) -> np.ndarray:
    """Center-of-mass offset (mm) of the 3x3x3 neighborhood around index, at most one pitch per axis"""
    lo = [max(i - 1, 0) for i in index]
    hi = [min(i + 2, n) for i, n in zip(index, values.shape)]
    patch = np.clip(values[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]], 0.0, None)
    mass = patch.sum()
    if mass <= 0:
        return np.zeros(3)
    offsets = [np.arange(lo[a], hi[a]) - index[a] for a in range(3)]
    ox, oy, oz = np.meshgrid(*offsets, indexing="ij")
    com = np.array([(ox * patch).sum(), (oy * patch).sum(), (oz * patch).sum()]) / mass
    return np.clip(com, -1.0, 1.0) * pitch


def nms_3d(G: RootVolume, window: int = 3, threshold: float = 0.3, max_proposals: int = 10) -> List[RootProposal]:
    """Local maxima of a root volume as proposals, sorted by descending score.

    A voxel is kept iff it is the strict maximum of its window neighborhood,
    equal values resolved in favor of the lexicographically smallest index,
    and its value is at least the threshold.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    data = G.data.detach().to(torch.float64)
    pooled = F.max_pool3d(data[None, None], kernel_size=window, stride=1, padding=window // 2)[0, 0]
    candidates = torch.nonzero((data >= pooled) & (data >= threshold)).tolist()

    values = data.cpu().numpy()
    r = window // 2
    peaks = []
    for idx in candidates:
        v = values[tuple(idx)]
        lo = [max(i - r, 0) for i in idx]
        block = values[lo[0] : idx[0] + r + 1, lo[1] : idx[1] + r + 1, lo[2] : idx[2] + r + 1]
        ties = np.argwhere(block == v) + np.array(lo)
        if any(tuple(t) < tuple(idx) for t in ties.tolist()):
            continue
        peaks.append((float(v), tuple(idx)))

    peaks.sort(key=lambda p: (-p[0], p[1]))
    grid = G.grid
    pitch = grid.pitch
    proposals = []
    for score, idx in peaks[:max_proposals]:
        center = np.asarray(grid.voxel_center(idx)) + _refine(values, idx, pitch)
        center = np.clip(center, grid.lower, grid.upper)
        proposals.append(
            RootProposal(
                position=tuple(float(c) for c in center),
                score=min(score, 1.0),
                voxel_index=tuple(int(i) for i in idx),
            )
        )
    if len(peaks) > max_proposals:
        logger.debug(f"NMS kept {max_proposals} of {len(peaks)} peaks")
    return proposals
