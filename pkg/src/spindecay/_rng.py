"""Seed-substream plumbing.

All randomness flows from one root seed. A consumer asks for a named
substream via integer keys; substream (k0, k1, ...) is reproducible
regardless of how many other substreams exist or in which order they are
drawn, which keeps Monte-Carlo results independent of scheduling.
"""

from __future__ import annotations

import numpy as np

# Stable stream ids per module; new consumers append, never renumber.
STREAM_SPECTRUM = 1
STREAM_PULSES = 2
STREAM_NOISE = 3
STREAM_INSTRUMENT = 4
STREAM_CLI = 5


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream named by integer ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
