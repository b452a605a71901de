"""Deterministic random-stream derivation.

Every source of randomness in a run is a named substream of one 64-bit
master seed, derived through ``numpy.random.SeedSequence``.  The rule:

    stream(master, *path) == default_rng(SeedSequence([master, *path]))

where ``path`` is a tuple of small integer keys.  Episode-level streams use
the episode index as the first key followed by a subsystem key, so the same
(master seed, episode) pair always yields the same placement, policy
sampling, and conformal u-draw streams, independent of execution order.
"""

from __future__ import annotations

import numpy as np

# Subsystem keys for per-episode streams.
PLACEMENT = 0
POLICY = 1
CONFORMAL_U = 2

# Run-level keys (network init, buffer splits, minibatch shuffles).
INIT = 100
TRAINING = 101


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for one named substream of ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *path]))


def stream_seed(master_seed: int, *path: int) -> int:
    """Collapse a substream to a single integer seed (for APIs taking ints)."""
    return int(np.random.SeedSequence([int(master_seed), *path]).generate_state(1, np.uint64)[0])


def episode_streams(master_seed: int, episode: int) -> tuple[int, np.random.Generator, np.random.Generator]:
    """Placement seed plus policy and conformal-u generators for one episode."""
    placement = stream_seed(master_seed, episode, PLACEMENT)
    policy = stream(master_seed, episode, POLICY)
    u_draws = stream(master_seed, episode, CONFORMAL_U)
    return placement, policy, u_draws
