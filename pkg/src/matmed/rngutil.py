"""Named random substreams derived from a single master seed.

Every source of randomness in a run (chain, replicate, MC integration, ...)
draws from a substream addressed by name, so runs replay bit-identically
from the master seed recorded in the manifest.
"""

import zlib

import numpy as np


def _spawn_key(names) -> tuple:
    return tuple(zlib.crc32(str(n).encode("utf8")) for n in names)


def substream(master_seed: int, *names) -> np.random.Generator:
    """Generator for the substream addressed by ``names`` under ``master_seed``."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=_spawn_key(names))
    return np.random.default_rng(ss)


def substream_seed(master_seed: int, *names) -> int:
    """Serializable integer seed for the named substream."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=_spawn_key(names))
    state = ss.generate_state(2, dtype=np.uint64)
    return int(state[0]) << 64 | int(state[1])
