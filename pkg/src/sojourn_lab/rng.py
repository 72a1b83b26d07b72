"""Seeded counter-based substreams.

Replicate ``r`` of a run seeded with ``seed`` always draws from the Philox
stream keyed by ``(seed, r)``, so a run split across workers reproduces the
serial run bit for bit.
"""
import os

import numpy as np

SEED_ENV = "SOJOURN_LAB_SEED"


def substream(seed, replicate=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


def default_seed(fallback=0):
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else fallback


def chunk_ranges(replicates, chunks):
    """Split ``range(replicates)`` into at most ``chunks`` contiguous pieces."""
    chunks = max(1, min(int(chunks), replicates))
    bounds = np.linspace(0, replicates, chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
