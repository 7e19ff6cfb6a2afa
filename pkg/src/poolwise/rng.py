"""Seed derivation for reproducible streams.

All stochastic operations in the package take an explicit seed and derive
independent child streams from it with `make_rng`, so identical inputs always
produce identical outputs no matter how work is ordered or parallelized.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    if isinstance(part, bytes):
        digest = hashlib.blake2b(part, digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"cannot derive entropy from {type(part)!r}")


def seed_sequence(*parts) -> np.random.SeedSequence:
    """Deterministic SeedSequence from a tuple of ints / strings / bytes."""
    return np.random.SeedSequence([_as_entropy(p) for p in parts])


def make_rng(*parts) -> np.random.Generator:
    """Independent generator for the stream named by `parts`."""
    return np.random.default_rng(seed_sequence(*parts))


def stable_fingerprint(payload: str) -> int:
    """64-bit stable hash of a canonical string (used to key streams on histories)."""
    return _as_entropy(payload)
