"""Deterministic random-stream derivation.

Every random draw in the package flows from a single integer seed through
counter-based Philox generators.  A stream is identified by the seed plus a
tuple of string labels hashed into the Philox key, so the same
``(seed, *labels)`` pair yields the same stream on every platform,
independent of how many other streams were consumed before it.
"""

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Return an independent generator for (seed, labels).

    Labels are stringified and hashed with blake2b, so any hashable
    scalars (names, frame ids, channel indices) can be mixed in.
    """
    h = hashlib.blake2b(digest_size=8)
    for label in labels:
        h.update(str(label).encode("utf-8"))
        h.update(b"\x1f")  # separator so ("ab","c") != ("a","bc")
    sub = int.from_bytes(h.digest(), "little")
    key = np.array([int(seed) & _U64, sub], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
