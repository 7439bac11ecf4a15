"""
Deterministic seed derivation so every frame, stage and step draws from its
own reproducible random stream.
"""

import zlib
from typing import Union

import numpy as np
import torch

_MASK = (1 << 64) - 1

Key = Union[int, str]


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(seed: int, *keys: Key) -> int:
    """Mixes a base seed with integer or string keys into a 63-bit seed"""
    h = splitmix64(seed & _MASK)
    for key in keys:
        k = zlib.crc32(key.encode()) if isinstance(key, str) else int(key) & _MASK
        h = splitmix64(h ^ k)
    return h >> 1


def numpy_rng(seed: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


def torch_generator(seed: int, *keys: Key) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(derive_seed(seed, *keys))
    return g

