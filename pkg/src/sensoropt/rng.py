"""Counter-based random streams.

Every random draw in the package goes through :func:`stream`, which keys a
Philox generator on ``(master_seed, *indices)``.  A sample's stream depends
only on its own indices, so serial and parallel runs see identical draws.
"""

import numpy as np


def stream(seed, *indices):
    """Return an independent generator for ``(seed, *indices)``."""
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(i) for i in indices]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
