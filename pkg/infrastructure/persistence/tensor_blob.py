"""
TensorBlob codec: a tiny binary container for one float32 array.

Layout: magic "SPT1", u8 dtype code (1 = float32 little-endian), u8 ndim,
ndim x u32 little-endian dims, then the row-major payload.
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import torch

from domain.errors import FormatError

MAGIC = b"SPT1"
DTYPE_FLOAT32 = 1
_HEADER = struct.Struct("<4sBB")

ArrayLike = Union[np.ndarray, torch.Tensor]


def encode_blob(array: ArrayLike) -> bytes:
    if isinstance(array, torch.Tensor):
        array = array.detach().cpu().numpy()
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    if arr.ndim > 255:
        raise FormatError(f"cannot encode an array with {arr.ndim} dimensions")
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return _HEADER.pack(MAGIC, DTYPE_FLOAT32, arr.ndim) + dims + arr.tobytes()


def decode_blob_prefix(data: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Decodes one blob starting at offset; returns the array and the offset just past it"""
    if len(data) - offset < _HEADER.size:
        raise FormatError("truncated TensorBlob header")
    magic, dtype, ndim = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise FormatError(f"bad TensorBlob magic {magic!r}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"unsupported TensorBlob dtype code {dtype}")
    offset += _HEADER.size
    if len(data) - offset < 4 * ndim:
        raise FormatError("truncated TensorBlob dims")
    shape = struct.unpack_from(f"<{ndim}I", data, offset)
    offset += 4 * ndim
    nbytes = 4 * int(np.prod(shape, dtype=np.int64))
    if len(data) - offset < nbytes:
        raise FormatError(f"TensorBlob payload has {len(data) - offset} bytes, expected {nbytes}")
    arr = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset).reshape(shape).astype(np.float32)
    return arr, offset + nbytes


def decode_blob(data: bytes) -> np.ndarray:
    arr, end = decode_blob_prefix(data)
    if end != len(data):
        raise FormatError(f"{len(data) - end} trailing bytes after TensorBlob payload")
    return arr


def write_blob(path: Path, array: ArrayLike) -> None:
    Path(path).write_bytes(encode_blob(array))


def read_blob(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing TensorBlob {path}")
    return decode_blob(path.read_bytes())


def read_tensor(path: Path) -> torch.Tensor:
    return torch.from_numpy(read_blob(path))
