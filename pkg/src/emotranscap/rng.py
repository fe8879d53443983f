"""Named random substreams derived from a single run seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream_seed(seed: int, *names: object) -> int:
    """Stable 63-bit seed for ``(seed, *names)``; independent of PYTHONHASHSEED."""
    keys = [int(seed) & 0xFFFFFFFF]
    for name in names:
        if isinstance(name, int):
            keys.append(name & 0xFFFFFFFF)
        else:
            keys.append(zlib.crc32(str(name).encode("utf-8")))
    ss = np.random.SeedSequence(keys)
    hi, lo = (int(x) for x in ss.generate_state(2, dtype=np.uint32))
    return ((hi << 32) | lo) & ((1 << 63) - 1)


def substream(seed: int, *names: object) -> np.random.Generator:
    return np.random.default_rng(substream_seed(seed, *names))
