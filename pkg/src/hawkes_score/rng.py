"""Counter-based random streams.

Replicate ``k`` of a run seeded with ``master_seed`` draws from Philox
generators keyed by ``SeedSequence(master_seed, spawn_key=(k, j))``; stream
``j`` separates the independent uses inside one replicate. A replicate's
draws therefore depend only on ``(master_seed, k)``, never on how many
replicates run or in which order.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replicate_seed(master_seed: int, index: int) -> int:
    """A 64-bit seed for replicate ``index`` derived from ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed) & MASK64, spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
