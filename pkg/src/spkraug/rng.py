"""Named, versioned random generators.

Every stochastic step in the toolkit (subset draws, pair sampling, loss-side
reference draws, optimizer inits) gets its own generator derived from a user
seed plus a purpose string, so each step is independently reproducible and
adding a new consumer never shifts another one's stream.
"""

import hashlib

import numpy as np

_VERSION = "spkraug.rng.v1"


def rng_for(seed: int, purpose: str) -> np.random.Generator:
    """Derive a deterministic generator for (seed, purpose)."""
    digest = hashlib.sha256(f"{_VERSION}|{seed}|{purpose}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))
