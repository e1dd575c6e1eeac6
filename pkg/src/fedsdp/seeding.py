"""Deterministic random-stream derivation.

Every stochastic operation in the simulator draws from a generator derived
from the master seed and a structural path (stream tag, round, client id).
Because streams are keyed by position rather than by execution order, any
degree of intra-round parallelism yields bit-identical results.
"""

import numpy as np

# Stream tags keep the entropy tuples of unrelated streams disjoint.
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_SELECT = 2
STREAM_CLIENT = 3


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Return a generator keyed by (master_seed, *path).

    Equal arguments always produce the same stream; distinct paths produce
    statistically independent streams.
    """
    return np.random.default_rng(np.random.SeedSequence((int(master_seed), *map(int, path))))
