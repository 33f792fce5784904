"""Deterministic derived random streams.

Every stochastic routine in this package takes an explicit stream. Streams are
derived from a master seed plus an integer key path, e.g. ``(replicate,)`` or
``(replicate, particle)``, through :class:`numpy.random.SeedSequence` on top of
the counter-based Philox generator. The derivation depends only on the key
path, never on scheduling, so replicate-level parallelism is bit-reproducible
regardless of worker count.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "substream"]


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator keyed by ``(seed, *path)``.

    The same ``(seed, path)`` always yields the same draws; distinct paths give
    statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def substream(gen: np.random.Generator, index: int) -> np.random.Generator:
    """Child stream of an existing generator, keyed by ``index``.

    Used for per-particle subtree extensions: the child draws are fixed by the
    parent stream's seed material and ``index`` alone.
    """
    ss = gen.bit_generator.seed_seq  # type: ignore[attr-defined]
    child = np.random.SeedSequence(
        entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(index),)
    )
    return np.random.Generator(np.random.Philox(child))
