"""Seed-stream management.

All randomness in the package flows from one master seed through a
counter-based splittable generator (Philox).  Substreams are addressed by an
integer path, so replication r of experiment e always draws from the stream
(seed, e, r) no matter how many draws other streams have consumed.
"""
from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the given (seed, *path) address."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
