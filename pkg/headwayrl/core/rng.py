"""
Seeded random streams.

Every randomized operation takes an explicit seed and draws from a numpy
Generator derived from it. Independent consumers (network init, exploration,
replay sampling, GA variation, ...) get their own stream, keyed by a stable
tag, so adding draws in one place never shifts the numbers seen elsewhere.
"""

import zlib
from typing import Union

import numpy as np

SeedLike = Union[int, np.integer]


def _tag_key(tag: str) -> int:
    # crc32 is stable across processes, unlike hash()
    return zlib.crc32(tag.encode("utf-8")) & 0xFFFFFFFF


def make_rng(seed: SeedLike, tag: str = "") -> np.random.Generator:
    """Return a Generator for ``seed``, optionally split off by ``tag``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    if tag:
        entropy.append(_tag_key(tag))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: SeedLike, *parts: Union[str, int]) -> int:
    """Derive a child seed from ``seed`` and a path of tags/indices."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in parts:
        entropy.append(_tag_key(part) if isinstance(part, str) else int(part) & 0xFFFFFFFF)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
