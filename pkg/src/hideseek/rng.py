"""Counter-based random streams.

Every trial gets its own Philox stream keyed by ``(seed, *keys)``, so trials can
run in any order or in parallel and still reproduce bit-for-bit.
"""

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent generator for the key path ``(seed, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
