"""Deterministic per-item random generators.

Several stages need randomness that is stable per (seed, item) regardless of
processing order or thread count. Deriving each generator from a hash of the
item's identity gives that: the same (seed, parts) always yields the same
stream, and distinct items get independent streams.
"""

import hashlib

import numpy as np


def derive_rng(seed: int, *parts) -> np.random.Generator:
    """Generator keyed by the run seed plus any hashable identity parts."""
    material = "\x1f".join([str(int(seed))] + [str(p) for p in parts])
    digest = hashlib.blake2b(material.encode("utf-8"), digest_size=16).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))
