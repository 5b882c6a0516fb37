"""Random streams: counter-based Philox generators, explicitly seeded."""

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def chain_seed(seed: int, chain: int) -> np.random.SeedSequence:
    """Independent seed for chain ``chain`` of a multi-chain run."""
    return np.random.SeedSequence(seed, spawn_key=(chain,))


def randbelow(rng: np.random.Generator, k: int) -> int:
    """Uniform integer in ``[0, k)``, exact for arbitrarily large ``k``."""
    if k <= 0:
        raise ValueError("randbelow needs k > 0")
    if k < 1 << 62:
        return int(rng.integers(k))
    nbits = k.bit_length()
    words = (nbits + 62) // 63
    while True:
        r = 0
        for w in rng.integers(0, 1 << 63, size=words, dtype=np.int64, endpoint=False):
            r = r << 63 | int(w)
        r &= (1 << nbits) - 1
        if r < k:
            return r
