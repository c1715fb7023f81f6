"""Seeded, splittable random streams.

Every random draw in the library comes from an ``RngStream`` keyed by a base seed
and a hierarchical path such as ``[trial, stage, query, block]``.  Streams are
built on numpy's counter-based Philox generator through ``SeedSequence`` spawn
keys, so two distinct paths give independent streams and the same
``(seed, path)`` always replays the same draws, no matter which worker runs it.
"""

from typing import Sequence, Tuple

import numpy as np

_SEED_MASK = (1 << 64) - 1


class RngStream:
    """A single-owner random stream addressed by ``(seed, path)``.

    Use ``child(i)`` to hand an independent sub-stream to a sub-computation and
    ``gen`` for the draws owned by this stream.
    """

    __slots__ = ("seed", "path", "gen")

    def __init__(self, seed: int, path: Sequence[int] = ()):
        path = tuple(int(p) for p in path)
        if any(p < 0 for p in path):
            raise ValueError(f"rng path entries must be nonnegative, got {path}")
        self.seed = int(seed) & _SEED_MASK
        self.path: Tuple[int, ...] = path
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=path)
        self.gen = np.random.Generator(np.random.Philox(seq))

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(index))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={list(self.path)})"


def derive_rng(parent_seed: int, path: Sequence[int] = ()) -> RngStream:
    """Return the stream for ``(parent_seed, path)``."""
    return RngStream(parent_seed, path)
