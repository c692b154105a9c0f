"""Deterministic random substreams.

One root seed per experiment is split into independent generators keyed by
``(run, purpose, agent)``. Streams are consumed strictly sequentially, so
prefetching in blocks yields the same values as drawing one at a time; a
run's trajectory therefore does not depend on how runs are batched.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    REWARD = 0          # M init uniforms, then one uniform per decision round
    BYZ_PULL = 1        # one uniform per round
    ATTACK_PICK = 2     # one uniform per round
    ATTACK_NOISE = 3    # N*M standard normals per round
    ATTACK_BIAS = 4     # M uniforms once
    SOFTMAX = 5         # one uniform per round
    GRAPH = 6           # N*N uniforms per realization (2*N*N with degree repair)
    KAPPA = 7           # N uniforms once


def substream(root_seed: int, run: int, purpose: Purpose, agent: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(root_seed, spawn_key=(run, int(purpose), agent))
    return np.random.Generator(np.random.PCG64(seq))


class BlockBuffer:
    """Per-round draws for a batch of runs, refilled in blocks.

    ``buffer.take(t)`` returns an array of shape ``(R, n_streams, *shape)``
    holding each stream's draw for round ``t``. Rounds must be requested in
    increasing order.
    """

    def __init__(self, generators, shape=(), normal=False, block=256):
        # generators: R lists of per-stream Generators
        self.generators = generators
        self.shape = tuple(shape)
        self.normal = normal
        self.block = block
        self._start = None
        self._data = None

    def _refill(self, start: int):
        size = (self.block,) + self.shape
        runs = []
        for gens in self.generators:
            if self.normal:
                runs.append([g.standard_normal(size) for g in gens])
            else:
                runs.append([g.random(size) for g in gens])
        # (R, S, block, *shape) -> (block, R, S, *shape)
        self._data = np.moveaxis(np.asarray(runs, dtype=float), 2, 0)
        self._start = start

    def take(self, t: int) -> np.ndarray:
        if self._start is None or t >= self._start + self.block:
            if self._start is not None and t != self._start + self.block:
                raise ValueError("rounds must be consumed consecutively")
            self._refill(t if self._start is None else self._start + self.block)
        return self._data[t - self._start]
