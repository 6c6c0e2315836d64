"""Counter-based random streams.

Every draw in the package comes from a Philox generator whose key is derived
from (seed, purpose, replicate).  A replicate therefore sees the same numbers
regardless of how many workers run or in which order they finish.
"""

import numpy as np

# purpose tags, part of the key so that different samplers never share numbers
CHOLESKY = 1
SPECTRAL = 2
IID = 3
BOOTSTRAP = 4

MAX_SEED = 2**64 - 1


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed, purpose, replicate=0):
    """Independent generator for one (seed, purpose, replicate) triple."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(int(purpose), int(replicate)))
    return np.random.Generator(np.random.Philox(ss))
