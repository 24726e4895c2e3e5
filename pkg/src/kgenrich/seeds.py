"""Named, reproducible random streams.

All randomness in a pipeline stage flows from a single root seed; each
purpose (split, init, negatives, proposals, ...) gets its own child stream
so results do not depend on evaluation order or parallelism.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_stream(seed: int, *purpose: str | int) -> np.random.Generator:
    """Child generator of `seed`, namespaced by the purpose path."""
    key = tuple(
        p if isinstance(p, int) else zlib.crc32(p.encode("utf-8")) for p in purpose
    )
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
