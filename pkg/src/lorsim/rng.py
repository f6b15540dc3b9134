"""Counter-based random streams.

Every replication gets its own Philox stream whose key is a hash of the master
seed and a scenario key, and whose counter's top word is the replication
index. A replication's draws are therefore a pure function of
``(master_seed, scenario_key, index)``, independent of how work is scheduled.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_key(master_seed, scenario_key):
    """128-bit Philox key derived from the master seed and a scenario string."""
    h = hashlib.blake2b(digest_size=16)
    h.update(int(master_seed & _MASK64).to_bytes(8, "little"))
    h.update(str(scenario_key).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def replication_stream(master_seed, scenario_key, index, key=None):
    """Generator for one replication.

    ``key`` may be passed in to skip re-hashing when many streams share a
    scenario.
    """
    if index < 0:
        raise ValueError("replication index must be non-negative")
    if key is None:
        key = stream_key(master_seed, scenario_key)
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(index)])
    return np.random.Generator(bitgen)


def default_stream(seed):
    """Plain seeded stream for one-off sampling (tests, moment checks)."""
    return np.random.Generator(np.random.Philox(seed))
