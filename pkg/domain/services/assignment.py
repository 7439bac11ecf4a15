"""
Optimal one-to-one assignment between predicted and pseudo 2D persons.
"""

from typing import List, Optional, Tuple

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from domain.errors import ShapeMismatch

Assignment = List[Tuple[int, int]]


def _to_numpy(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy()
    return np.asarray(x)


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimum-cost rectangular assignment.

    The matrix is padded to square; padded cells and non-finite cells cost
    ten times the largest finite entry plus one and are discarded afterwards.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ShapeMismatch(f"cost matrix must be 2D, got shape {cost.shape}")
    P, Q = cost.shape
    if P == 0 or Q == 0:
        return []
    finite = np.isfinite(cost)
    if not finite.any():
        return []
    big = 10.0 * float(np.max(np.abs(cost[finite]))) + 1.0
    n = max(P, Q)
    square = np.full((n, n), big)
    square[:P, :Q] = np.where(finite, cost, big)
    rows, cols = linear_sum_assignment(square)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if r < P and c < Q and finite[r, c]]


def matching_cost(
    pred: np.ndarray, pseudo: np.ndarray, pred_vis: np.ndarray, pseudo_vis: np.ndarray
) -> np.ndarray:
    """(P, Q) mean absolute coordinate error over joints visible in both; inf when none are"""
    diff = np.abs(pred[:, None] - pseudo[None]).mean(axis=-1)  # (P, Q, J)
    both = pred_vis[:, None] & pseudo_vis[None]
    count = both.sum(axis=-1)
    total = np.where(both, diff, 0.0).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.inf)


def match_poses_per_view(
    pred,
    pseudo,
    pred_vis=None,
    pseudo_vis: Optional[np.ndarray] = None,
) -> Assignment:
    """Hungarian matching of predicted (P, J, 2) to pseudo (Q, J, 2) persons of one view.

    Returns (pred_index, pseudo_index) pairs, at most min(P, Q) of them.
    """
    pred = _to_numpy(pred).astype(np.float64)
    pseudo = _to_numpy(pseudo).astype(np.float64)
    if pred.shape[0] == 0 or pseudo.shape[0] == 0:
        return []
    if pred.shape[1:] != pseudo.shape[1:]:
        raise ShapeMismatch(f"pred {pred.shape} and pseudo {pseudo.shape} joints disagree")
    pred_vis = np.ones(pred.shape[:2], dtype=bool) if pred_vis is None else _to_numpy(pred_vis).astype(bool)
    pseudo_vis = np.ones(pseudo.shape[:2], dtype=bool) if pseudo_vis is None else _to_numpy(pseudo_vis).astype(bool)
    return hungarian(matching_cost(pred, pseudo, pred_vis, pseudo_vis))
