"""Deterministic seed derivation.

Every random draw in the package flows through a ``numpy.random.Generator``
whose seed is derived here. Seeds are produced by hashing a label path with
SHA-256, so they are stable across processes, platforms, and Python hash
randomization. The same (master seed, labels...) path always yields the same
stream, and distinct paths yield independent streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(*parts: int | str) -> int:
    """Derive a 63-bit seed from a label path.

    Parts may be ints or strings; they are encoded unambiguously (type tag
    plus value) so ``derive_seed(1)`` and ``derive_seed("1")`` differ.
    """
    if not parts:
        raise TypeError("derive_seed needs at least one part")
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, bool) or not isinstance(p, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(p).__name__}")
        tag = b"i:" if isinstance(p, int) else b"s:"
        h.update(tag + str(p).encode("utf-8") + _SEP)
    return int.from_bytes(h.digest()[:8], "big") >> 1


def rng_for(*parts: int | str) -> np.random.Generator:
    """Generator seeded from a label path."""
    return np.random.default_rng(derive_seed(*parts))
