"""Named, splittable random substreams.

Every source of randomness in the package derives from one integer seed via
`substream(seed, *path)`: the path (ints and/or short string labels) becomes a
SeedSequence spawn key, so distinct paths give statistically independent
generators and the whole tree is reproducible from the root seed alone.
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_element(item) -> int:
    if isinstance(item, (int, np.integer)):
        if item < 0:
            raise ValueError(f"substream path ints must be >= 0, got {item}")
        return int(item)
    if isinstance(item, str):
        return zlib.crc32(item.encode("utf-8"))
    raise TypeError(f"substream path elements are ints or strings, got {item!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Generator for the substream identified by (seed, *path)."""
    key = tuple(_path_element(p) for p in path)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
