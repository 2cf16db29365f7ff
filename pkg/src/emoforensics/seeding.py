"""Stable seed derivation for named child runs and per-sample streams."""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, name: str) -> int:
    """64-bit child seed from a base seed and a tag string.

    Uses blake2b so the mapping is stable across platforms and Python
    processes (the builtin ``hash`` is salted and must never be used here).
    """
    digest = hashlib.blake2b(f"{seed}/{name}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
