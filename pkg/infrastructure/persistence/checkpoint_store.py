"""
Single-file checkpoints: magic "SPCK", u32 header length, a JSON header, then
named TensorBlobs for every parameter and optimizer state tensor.
"""

import json
import logging
import struct
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import torch

from application.interfaces.checkpoint_repository import AbstractCheckpointRepository, CheckpointState
from domain.errors import FormatError
from domain.models.training import StageName
from infrastructure.persistence.tensor_blob import decode_blob_prefix, encode_blob

logger = logging.getLogger(__name__)

MAGIC = b"SPCK"
SUFFIX = ".ckpt"
_U32 = struct.Struct("<I")
_PARAM_PREFIX = "param/"
_OPTIM_PREFIX = "optim/"


def _split_optimizer(optimizer: Optional[Dict[str, object]]) -> Tuple[Optional[Dict], Dict[str, torch.Tensor]]:
    if optimizer is None:
        return None, {}
    tensors: Dict[str, torch.Tensor] = {}
    scalars: Dict[str, Dict[str, object]] = {}
    for idx, entry in optimizer["state"].items():
        for key, value in entry.items():
            if isinstance(value, torch.Tensor):
                tensors[f"{_OPTIM_PREFIX}{idx}/{key}"] = value
            else:
                scalars.setdefault(str(idx), {})[key] = value
    return {"param_groups": optimizer["param_groups"], "scalars": scalars}, tensors


def _join_optimizer(meta: Optional[Dict], tensors: Dict[str, torch.Tensor]) -> Optional[Dict[str, object]]:
    if meta is None:
        return None
    state: Dict[int, Dict[str, object]] = {}
    for idx, entry in meta.get("scalars", {}).items():
        state.setdefault(int(idx), {}).update(entry)
    for name, value in tensors.items():
        idx, key = name[len(_OPTIM_PREFIX) :].split("/", 1)
        state.setdefault(int(idx), {})[key] = value
    return {"state": state, "param_groups": meta["param_groups"]}


def _encode_scheduler(scheduler: Optional[Dict[str, object]]) -> Optional[Dict[str, object]]:
    if scheduler is None:
        return None
    out = dict(scheduler)
    milestones = out.get("milestones")
    if isinstance(milestones, Counter):
        out["milestones"] = sorted([int(m), int(n)] for m, n in milestones.items())
    return out


def _decode_scheduler(meta: Optional[Dict[str, object]]) -> Optional[Dict[str, object]]:
    if meta is None:
        return None
    out = dict(meta)
    milestones = out.get("milestones")
    if isinstance(milestones, list):
        out["milestones"] = Counter({int(m): int(n) for m, n in milestones})
    return out


def encode_checkpoint(state: CheckpointState) -> bytes:
    optim_meta, optim_tensors = _split_optimizer(state.optimizer)
    named = {f"{_PARAM_PREFIX}{k}": v for k, v in state.parameters.items()}
    named.update(optim_tensors)
    header = {
        "architecture": state.architecture,
        "stage": state.stage.value,
        "step": state.step,
        "epoch": state.epoch,
        "completed": state.completed,
        "optimizer": optim_meta,
        "scheduler": _encode_scheduler(state.scheduler),
        "tensors": list(named),
    }
    head = json.dumps(header, sort_keys=True).encode()
    parts = [MAGIC, _U32.pack(len(head)), head]
    for name, tensor in named.items():
        raw = name.encode()
        parts += [_U32.pack(len(raw)), raw, encode_blob(tensor)]
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> CheckpointState:
    if data[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {data[:4]!r}")
    try:
        (size,) = _U32.unpack_from(data, 4)
        header = json.loads(data[8 : 8 + size])
        offset = 8 + size
        tensors: Dict[str, torch.Tensor] = {}
        for _ in header["tensors"]:
            (n,) = _U32.unpack_from(data, offset)
            name = data[offset + 4 : offset + 4 + n].decode()
            arr, offset = decode_blob_prefix(data, offset + 4 + n)
            tensors[name] = torch.from_numpy(arr)
    except (struct.error, KeyError, ValueError) as e:
        raise FormatError(f"corrupt checkpoint: {e}") from e
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes in checkpoint")
    params = {k[len(_PARAM_PREFIX) :]: v for k, v in tensors.items() if k.startswith(_PARAM_PREFIX)}
    optim = {k: v for k, v in tensors.items() if k.startswith(_OPTIM_PREFIX)}
    return CheckpointState(
        architecture=header["architecture"],
        stage=StageName(header["stage"]),
        step=header["step"],
        epoch=header["epoch"],
        completed=header["completed"],
        parameters=params,
        optimizer=_join_optimizer(header["optimizer"], optim),
        scheduler=_decode_scheduler(header.get("scheduler")),
    )


class FileCheckpointRepository(AbstractCheckpointRepository):
    """One checkpoint file per stage inside a run directory"""

    def __init__(self, root: Path):
        self.root = Path(root)

    def save(self, state: CheckpointState, name: Optional[str] = None) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / (name or f"{state.stage.value}{SUFFIX}")
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(encode_checkpoint(state))
        tmp.replace(path)
        logger.debug(f"Saved {state.stage.value} checkpoint at step {state.step} to {path}")
        return path

    def load(self, path: Path) -> CheckpointState:
        path = Path(path)
        if not path.is_file():
            raise FormatError(f"no checkpoint at {path}")
        return decode_checkpoint(path.read_bytes())

    def find(self, stage: StageName, completed_only: bool = True) -> Optional[Path]:
        path = self.root / f"{stage.value}{SUFFIX}"
        if not path.is_file():
            return None
        if completed_only and not self.load(path).completed:
            return None
        return path

    def list(self) -> List[Path]:
        return sorted(self.root.glob(f"*{SUFFIX}"))
