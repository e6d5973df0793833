"""Counter-based random streams.

Every random draw in the package is addressed by ``(seed, phase, counter)``:
the seed and phase form a 128-bit Philox key and the counter selects a block
of the Philox sequence. A given draw therefore never depends on how many
other draws happened before it, which keeps results independent of thread
scheduling.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# phases
INIT = 1
SPLIT = 2
SHUFFLE = 3
MOMENTUM = 4
WARMUP = 5
SAMPLING = 6
STEP_SIZE = 7

#: Version tag of :func:`derive_member_seed`; stored in model files.
SEED_SCHEME = "splitmix64-v1"


def splitmix64(x):
    """SplitMix64 finalizer; a bijection on 64-bit integers."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_member_seed(master_seed, member_index):
    """Seed of ensemble member ``member_index``.

    ``splitmix64(master_seed + (member_index + 1) * golden)`` modulo 2**64.
    The golden-ratio increment is odd, so distinct indices below 2**64 give
    distinct pre-images and, the finalizer being a bijection, distinct seeds.
    """
    if member_index < 0:
        raise ValueError("member_index must be non-negative")
    return splitmix64((int(master_seed) & _MASK64) + (member_index + 1) * _GOLDEN)


def stream(seed, phase, counter=0):
    """Generator for block ``counter`` of stream ``(seed, phase)``."""
    key = (int(seed) & _MASK64) | ((int(phase) & _MASK64) << 64)
    ctr = np.array([0, 0, int(counter) & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=ctr))
