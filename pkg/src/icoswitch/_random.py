"""Counter-based random streams.

Every stream is a Philox generator whose key comes from ``(seed, *key)``
and whose counter is positioned by a block index, so any (key, block)
pair can be regenerated independently of the order in which streams are
consumed. That is what lets trials and bootstrap chunks run concurrently
and still reduce to bit-identical results.
"""

from functools import lru_cache

import numpy as np

from ._validation import check_seed


@lru_cache(maxsize=4096)
def _philox_key(seed, key):
    return tuple(int(w) for w in np.random.SeedSequence(seed, spawn_key=key).generate_state(2, np.uint64))


def stream(seed, key=(), block=0):
    """Return a Generator for block ``block`` of the stream named by ``(seed, key)``."""
    seed = check_seed(seed)
    if block < 0:
        raise ValueError("block index must be non-negative")
    words = _philox_key(seed, tuple(int(k) for k in key))
    # high counter words hold the block index; blocks never overlap
    counter = [0, 0, block & (2**64 - 1), block >> 64]
    bitgen = np.random.Philox(key=np.array(words, dtype=np.uint64), counter=counter)
    return np.random.Generator(bitgen)
