"""
Domain models for skeletons and 2D / 3D pose sets.
"""

from typing import List, Optional, Sequence, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from domain.errors import ShapeMismatch

# Coordinates given to joints that cannot be observed (behind camera, dropped person).
SENTINEL_PX = -1.0e4

PANOPTIC_JOINTS = [
    "neck",
    "nose",
    "mid-hip",
    "l-shoulder",
    "l-elbow",
    "l-wrist",
    "l-hip",
    "l-knee",
    "l-ankle",
    "r-shoulder",
    "r-elbow",
    "r-wrist",
    "r-hip",
    "r-knee",
    "r-ankle",
]
PANOPTIC_PARENTS = [2, 0, -1, 0, 3, 4, 2, 6, 7, 0, 9, 10, 2, 12, 13]
PANOPTIC_BONES = [
    (450.0, 550.0),  # neck
    (150.0, 220.0),  # nose
    (0.0, 0.0),  # root
    (150.0, 210.0),
    (250.0, 320.0),
    (230.0, 290.0),
    (90.0, 130.0),
    (380.0, 460.0),
    (370.0, 440.0),
    (150.0, 210.0),
    (250.0, 320.0),
    (230.0, 290.0),
    (90.0, 130.0),
    (380.0, 460.0),
    (370.0, 440.0),
]
PANOPTIC_LIMBS = [(3, 4), (4, 5), (9, 10), (10, 11), (6, 7), (7, 8), (12, 13), (13, 14), (0, 1), (0, 2)]


class SkeletonSpec(BaseModel):
    """Kinematic tree of the tracked joints"""

    model_config = ConfigDict(frozen=True)

    joint_names: List[str] = Field(default_factory=lambda: list(PANOPTIC_JOINTS))
    parent: List[int] = Field(default_factory=lambda: list(PANOPTIC_PARENTS), description="Parent index, root = -1")
    bone_length_range: List[Tuple[float, float]] = Field(
        default_factory=lambda: list(PANOPTIC_BONES),
        description="Per-joint (min, max) length of the bone to its parent, mm",
    )
    limb_pairs: List[Tuple[int, int]] = Field(default_factory=lambda: list(PANOPTIC_LIMBS), description="Limbs for PCP")

    @model_validator(mode="after")
    def check_tree(self) -> "SkeletonSpec":
        J = len(self.joint_names)
        if len(self.parent) != J or len(self.bone_length_range) != J:
            raise ShapeMismatch("joint_names, parent and bone_length_range must have equal length")
        roots = [j for j, p in enumerate(self.parent) if p == -1]
        if len(roots) != 1:
            raise ValueError(f"skeleton must have exactly one root, found {len(roots)}")
        for j in range(J):
            seen = set()
            k = j
            while k != -1:
                if k in seen or not (-1 <= self.parent[k] < J):
                    raise ValueError(f"parent array is not a tree (joint {j})")
                seen.add(k)
                k = self.parent[k]
        for lo, hi in self.bone_length_range:
            if lo > hi or lo < 0:
                raise ValueError(f"bad bone length range ({lo}, {hi})")
        for a, b in self.limb_pairs:
            if not (0 <= a < J and 0 <= b < J):
                raise ValueError(f"limb ({a}, {b}) references a missing joint")
        return self

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def root_index(self) -> int:
        return self.parent.index(-1)

    def topological_order(self) -> List[int]:
        """Joints ordered so every parent precedes its children"""
        order = [self.root_index]
        frontier = [self.root_index]
        while frontier:
            nxt = []
            for p in frontier:
                children = [j for j, q in enumerate(self.parent) if q == p]
                order.extend(children)
                nxt.extend(children)
            frontier = nxt
        return order


class Pose3DSet(BaseModel):
    """World-space joints of P persons"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    joints: torch.Tensor = Field(..., description="(P, J, 3) world coordinates, mm")
    person_ids: Optional[List[int]] = None

    @field_validator("joints")
    @classmethod
    def check_joints(cls, v: torch.Tensor) -> torch.Tensor:
        if v.ndim != 3 or v.shape[-1] != 3:
            raise ShapeMismatch(f"3D poses must be (P, J, 3), got {tuple(v.shape)}")
        if not torch.isfinite(v.detach()).all():
            raise ValueError("3D poses contain non-finite coordinates")
        return v

    @model_validator(mode="after")
    def check_ids(self) -> "Pose3DSet":
        if self.person_ids is not None and len(self.person_ids) != self.joints.shape[0]:
            raise ShapeMismatch("person_ids length must equal the person count")
        return self

    @property
    def num_persons(self) -> int:
        return self.joints.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joints.shape[1]

    @classmethod
    def empty(cls, num_joints: int, dtype: torch.dtype = torch.float64) -> "Pose3DSet":
        return cls(joints=torch.zeros((0, num_joints, 3), dtype=dtype), person_ids=[])


class Pose2DSet(BaseModel):
    """Per-view 2D joints of P persons, with confidence and in-image visibility"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    joints: torch.Tensor = Field(..., description="(C, P, J, 2) pixels")
    confidence: torch.Tensor = Field(..., description="(C, P, J) in [0, 1]")
    visibility_mask: torch.Tensor = Field(..., description="(C, P, J) bool, joint inside the image")

    @model_validator(mode="after")
    def check_shapes(self) -> "Pose2DSet":
        if self.joints.ndim != 4 or self.joints.shape[-1] != 2:
            raise ShapeMismatch(f"2D poses must be (C, P, J, 2), got {tuple(self.joints.shape)}")
        if self.confidence.shape != self.joints.shape[:-1] or self.visibility_mask.shape != self.joints.shape[:-1]:
            raise ShapeMismatch("confidence and visibility_mask must be (C, P, J)")
        if self.visibility_mask.dtype != torch.bool:
            raise ShapeMismatch("visibility_mask must be boolean")
        if not torch.isfinite(self.joints.detach()).all():
            raise ValueError("2D poses contain non-finite coordinates")
        conf = self.confidence.detach()
        if conf.numel() and (conf.min() < 0 or conf.max() > 1):
            raise ValueError("confidence must lie in [0, 1]")
        return self

    @property
    def num_views(self) -> int:
        return self.joints.shape[0]

    @property
    def num_persons(self) -> int:
        return self.joints.shape[1]

    @property
    def num_joints(self) -> int:
        return self.joints.shape[2]

    def persons_present(self, view: int) -> List[int]:
        """Person slots with at least one visible joint in the given view"""
        return torch.nonzero(self.visibility_mask[view].any(dim=-1)).flatten().tolist()

    @classmethod
    def from_joints(
        cls,
        joints: torch.Tensor,
        image_sizes: Sequence[Tuple[int, int]],
        confidence: Optional[torch.Tensor] = None,
        valid: Optional[torch.Tensor] = None,
    ) -> "Pose2DSet":
        """Builds a set whose visibility is derived from image bounds.

        Args:
            joints: (C, P, J, 2) pixel coordinates.
            image_sizes: per-view (width, height).
            confidence: optional (C, P, J); all ones when omitted.
            valid: optional (C, P, J) bool; False forces the sentinel and zero visibility.
        """
        if joints.shape[0] != len(image_sizes):
            raise ShapeMismatch(f"{joints.shape[0]} views of joints but {len(image_sizes)} image sizes")
        if confidence is None:
            confidence = torch.ones(joints.shape[:-1], dtype=joints.dtype, device=joints.device)
        if valid is not None:
            sentinel = torch.full_like(joints, SENTINEL_PX)
            joints = torch.where(valid[..., None], joints, sentinel)
        sizes = torch.tensor(image_sizes, dtype=joints.dtype, device=joints.device)  # (C, 2)
        wh = sizes[:, None, None, :]
        inside = (joints >= 0) & (joints < wh)
        mask = inside.all(dim=-1)
        if valid is not None:
            mask = mask & valid
        return cls(joints=joints, confidence=confidence, visibility_mask=mask)
