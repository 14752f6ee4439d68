"""Deterministic stream derivation on top of the Philox counter-based generator.

Every source of randomness in the package is a substream addressed by
(master seed, label path). Substreams are statistically independent, cheap to
create, and reproducible, so matrix generation, query sampling, and experiment
repetitions can run in any order (or in parallel) without changing results.
"""

import numpy as np

# Label namespaces; keep values stable, they are part of reproducibility.
MATRIX_STREAM = 0
QUERY_STREAM = 1
ATTACK_STREAM = 2
CALIBRATION_STREAM = 3
DATA_STREAM = 4

MAX_SEED = 2**64 - 1  # master seeds are persisted as u64


def validate_seed(seed):
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return int(seed)


def substream(master_seed, *path):
    """Independent Generator for (master_seed, *path), stable across runs.

    `path` is a tuple of small non-negative integers, typically a namespace
    label followed by an index (e.g. ``substream(seed, MATRIX_STREAM, j)``).
    """
    validate_seed(master_seed)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(x) for x in path))
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed():
    """Draw a master seed from OS entropy (used when the caller gave none)."""
    return int(np.random.SeedSequence().entropy) & MAX_SEED
