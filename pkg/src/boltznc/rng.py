"""Counter-based random streams.

Every consumer of randomness gets its own Philox stream keyed by
(seed, purpose, index). Draws inside a step or a path are made as arrays in a
fixed order, so results do not depend on thread count, vectorization, or
backend. Re-running any step or path with the same key replays identical
randomness without replaying history.
"""

import numpy as np

KIND_INIT = 1
KIND_STEP = 2
KIND_PATH = 3
KIND_ANALYSIS = 4

_KIND_BITS = 56


def stream(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    """Philox generator for the (seed, kind, index) triple."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in 64 bits")
    if index < 0 or index >= 2**_KIND_BITS:
        raise ValueError("stream index out of range")
    key = (int(seed) << 64) | (int(kind) << _KIND_BITS) | int(index)
    return np.random.Generator(np.random.Philox(key=key))
