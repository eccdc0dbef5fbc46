"""Counter-based random streams.

Every random draw in the package comes from a stream addressed by
``(seed, *counters)``, e.g. ``(seed, iteration, block)``. Streams are Philox
generators keyed through :class:`numpy.random.SeedSequence`, so results do not
depend on the order in which streams are created or on how work is split
across threads.
"""

from __future__ import annotations

import numpy as np

# Block tags used as the second counter in Gibbs streams.
BLOCK_RHO = 1
BLOCK_PROBIT = 2
BLOCK_LATENT = 3
BLOCK_SHRINK = 4
BLOCK_THETA = 5
BLOCK_LAMBDA = 6
BLOCK_LAMBDA_TILDE = 7
BLOCK_NOISE = 8
BLOCK_ADAPT = 9
BLOCK_INIT = 10
BLOCK_GEWEKE_DATA = 11


def substream(seed: int, *counters: int) -> np.random.Generator:
    """Return the generator for stream ``(seed, *counters)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(c) for c in counters))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(0 if rng is None else int(rng))
