"""
Evaluation metrics: greedy MPJPE matching, average precision over MPJPE
thresholds, recall and percentage of correct parts.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from domain.models.poses import Pose3DSet
from domain.models.report import PcpResult, PrCurve

logger = logging.getLogger(__name__)

PoseArray = Union[np.ndarray, torch.Tensor, Pose3DSet]


def _poses(x: PoseArray) -> np.ndarray:
    if isinstance(x, Pose3DSet):
        x = x.joints
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    arr = np.asarray(x, dtype=np.float64)
    return arr.reshape(0, 0, 3) if arr.size == 0 and arr.ndim < 3 else arr


@dataclass
class FrameEval:
    """Predictions and ground truth of one frame"""

    pred: np.ndarray  # (P, J, 3)
    scores: np.ndarray  # (P,)
    gt: np.ndarray  # (G, J, 3)
    gt_ids: Optional[List[int]] = None

    @classmethod
    def build(cls, pred: PoseArray, scores, gt: PoseArray, gt_ids: Optional[List[int]] = None) -> "FrameEval":
        if gt_ids is None and isinstance(gt, Pose3DSet):
            gt_ids = gt.person_ids
        return cls(_poses(pred), np.asarray(scores, dtype=np.float64).reshape(-1), _poses(gt), gt_ids)


def mpjpe_matrix(pred: PoseArray, gt: PoseArray) -> np.ndarray:
    """(P, G) mean per-joint Euclidean distance"""
    p, g = _poses(pred), _poses(gt)
    if len(p) == 0 or len(g) == 0:
        return np.zeros((len(p), len(g)))
    return np.linalg.norm(p[:, None] - g[None], axis=-1).mean(axis=-1)


def match_and_mpjpe(pred: PoseArray, gt: PoseArray) -> Tuple[List[Tuple[int, int]], List[float]]:
    """Greedy one-to-one matching by ascending MPJPE.

    Returns:
        (pairs, errors): (pred_index, gt_index) pairs and their MPJPE in mm,
        in the order they were matched.
    """
    D = mpjpe_matrix(pred, gt)
    pairs, errors = [], []
    if D.size == 0:
        return pairs, errors
    order = np.argsort(D, axis=None, kind="stable")
    used_p, used_g = set(), set()
    for flat in order:
        i, j = np.unravel_index(flat, D.shape)
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((int(i), int(j)))
        errors.append(float(D[i, j]))
        if len(pairs) == min(D.shape):
            break
    return pairs, errors


def precision_recall(frames: Sequence[FrameEval], threshold_mm: float) -> Tuple[np.ndarray, np.ndarray]:
    """Cumulative precision and recall over detections sorted by descending score.

    Each detection is compared to its nearest ground-truth person; it is a true
    positive when that distance is within the threshold and the person is not
    yet claimed by a higher-scoring detection.
    """
    total_gt = sum(len(f.gt) for f in frames)
    detections = []
    for fi, f in enumerate(frames):
        D = mpjpe_matrix(f.pred, f.gt)
        for p in range(len(f.pred)):
            if D.shape[1] == 0:
                detections.append((f.scores[p], fi, -1, np.inf))
            else:
                g = int(np.argmin(D[p]))
                detections.append((f.scores[p], fi, g, float(D[p, g])))
    detections.sort(key=lambda d: -d[0])

    claimed = set()
    tp = np.zeros(len(detections))
    for k, (_, fi, g, err) in enumerate(detections):
        if g >= 0 and err <= threshold_mm and (fi, g) not in claimed:
            claimed.add((fi, g))
            tp[k] = 1.0
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, len(detections) + 1) if detections else np.zeros(0)
    recall = ctp / total_gt if total_gt > 0 else np.zeros(len(detections))
    return precision, recall


def interpolated_ap(precision: np.ndarray, recall: np.ndarray) -> float:
    """Area under the precision envelope, evaluated at every recall change"""
    if len(precision) == 0:
        return 0.0
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    changes = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[changes + 1] - mrec[changes]) * mpre[changes + 1]))


def average_precision(frames: Sequence[FrameEval], threshold_mm: float) -> float:
    precision, recall = precision_recall(frames, threshold_mm)
    return interpolated_ap(precision, recall)


def pr_curve(frames: Sequence[FrameEval], threshold_mm: float) -> PrCurve:
    precision, recall = precision_recall(frames, threshold_mm)
    return PrCurve(recall=recall.tolist(), precision=precision.tolist())


def recall_at(frames: Sequence[FrameEval], threshold_mm: float = 500.0) -> float:
    """Fraction of ground-truth persons whose greedy match is within threshold_mm"""
    total = sum(len(f.gt) for f in frames)
    if total == 0:
        return 0.0
    hits = 0
    for f in frames:
        _, errors = match_and_mpjpe(f.pred, f.gt)
        hits += sum(e <= threshold_mm for e in errors)
    return hits / total


def pcp(frames: Sequence[FrameEval], limb_pairs: Sequence[Tuple[int, int]], factor: float = 0.5) -> PcpResult:
    """Per-actor fraction of limbs whose endpoints both lie within factor * limb length of the truth.

    Actors are keyed by ground-truth person id (or slot index); an unmatched
    actor counts all of its limbs as incorrect in that frame.
    """
    correct: Dict[str, int] = {}
    total: Dict[str, int] = {}
    skipped = 0
    for f in frames:
        pairs, _ = match_and_mpjpe(f.pred, f.gt)
        match = {g: p for p, g in pairs}
        for g in range(len(f.gt)):
            actor = str(f.gt_ids[g] if f.gt_ids is not None else g)
            for a, b in limb_pairs:
                length = float(np.linalg.norm(f.gt[g, a] - f.gt[g, b]))
                if length <= 0.0:
                    skipped += 1
                    continue
                total[actor] = total.get(actor, 0) + 1
                if g not in match:
                    continue
                p = f.pred[match[g]]
                ok = (
                    np.linalg.norm(p[a] - f.gt[g, a]) <= factor * length
                    and np.linalg.norm(p[b] - f.gt[g, b]) <= factor * length
                )
                correct[actor] = correct.get(actor, 0) + int(ok)
    if skipped:
        logger.warning(f"Skipped {skipped} zero-length limbs in PCP")
    per_actor = {k: correct.get(k, 0) / n for k, n in sorted(total.items()) if n > 0}
    average = float(np.mean(list(per_actor.values()))) if per_actor else 0.0
    return PcpResult(per_actor=per_actor, average=average)


@dataclass
class MatchSummary:
    errors: List[float] = field(default_factory=list)
    matched: int = 0
    missed: int = 0
    false_positive: int = 0

    @property
    def mean_mpjpe(self) -> float:
        return float(np.mean(self.errors)) if self.errors else 0.0


def summarize_matches(frames: Sequence[FrameEval]) -> MatchSummary:
    """Matched, missed and false-positive person counts with the matched MPJPE values"""
    out = MatchSummary()
    for f in frames:
        pairs, errors = match_and_mpjpe(f.pred, f.gt)
        out.errors.extend(errors)
        out.matched += len(pairs)
        out.missed += len(f.gt) - len(pairs)
        out.false_positive += len(f.pred) - len(pairs)
    return out
