"""Seeded random streams.

Every replication gets its own streams, keyed by (root seed, replication
index, stream id) through Philox's counter. Building a stream is a constant
time operation, so replication ``r`` never depends on how many replications
came before it or on which worker runs it.
"""
import numpy as np

STRUCTURE = 0
PROCESS = 1
AUX = 2

_MASK64 = (1 << 64) - 1


def make_generator(root_seed, rep=0, stream=PROCESS):
    root_seed = int(root_seed)
    if root_seed < 0:
        raise ValueError("seed must be non-negative")
    key = [root_seed & _MASK64, (root_seed >> 64) & _MASK64]
    bitgen = np.random.Philox(key=key, counter=[0, 0, int(rep), int(stream)])
    return np.random.Generator(bitgen)


def as_generator(seed, stream=PROCESS):
    """Accept an int seed, a (root, rep) pair or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, tuple):
        root, rep = seed
        return make_generator(root, rep, stream)
    return make_generator(seed, 0, stream)


def factory(seed, stream):
    """Zero-argument callable building the stream on first use."""
    if isinstance(seed, np.random.Generator):
        return lambda: seed
    return lambda: as_generator(seed, stream)
