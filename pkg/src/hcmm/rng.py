"""Seeded random streams.

All randomness in the package flows through numpy's PCG64 bit generator.
Independent substreams are children of a SeedSequence (distinct spawn
keys), so a single integer seed fixes every draw and per-worker or
per-block streams do not overlap.
"""

import numpy as np


def make_rng(seed=None):
    """Return a PCG64-backed generator.

    ``seed`` may be an int, a SeedSequence, or an existing Generator (which
    is returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(seed))


def seed_sequence(rng_or_seed):
    """Derive a SeedSequence from a seed or a generator.

    A generator contributes one 63-bit draw, so repeated calls on the same
    generator give distinct (but reproducible) sequences.
    """
    if isinstance(rng_or_seed, np.random.SeedSequence):
        return rng_or_seed
    if isinstance(rng_or_seed, np.random.Generator):
        return np.random.SeedSequence(int(rng_or_seed.integers(2**63)))
    return np.random.SeedSequence(rng_or_seed)


def children(rng_or_seed, count):
    """First ``count`` children of a seed sequence.

    Unlike ``SeedSequence.spawn`` this does not advance the parent, so the
    same parent always yields the same children.
    """
    ss = seed_sequence(rng_or_seed)
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,), pool_size=ss.pool_size)
        for i in range(count)
    ]


def substreams(rng_or_seed, count):
    """Return ``count`` independent generators derived from one source."""
    return [np.random.Generator(np.random.PCG64(c)) for c in children(rng_or_seed, count)]
