"""Seed derivation helpers.

All randomness in the toolkit flows through :func:`derive_rng` so that a base
seed plus a tuple of integer/string keys identifies one independent stream.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_entropy(key):
    if isinstance(key, str):
        # crc32 is stable across processes, unlike hash()
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & _MASK64


def mix(seed, *keys):
    """Return a 64-bit seed derived from ``seed`` and ``keys``."""
    ss = np.random.SeedSequence([int(seed) & _MASK64] + [_key_entropy(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed, *keys):
    ss = np.random.SeedSequence([int(seed) & _MASK64] + [_key_entropy(k) for k in keys])
    return np.random.Generator(np.random.PCG64(ss))
