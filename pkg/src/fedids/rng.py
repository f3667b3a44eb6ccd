"""Deterministic random streams.

A stream is identified by a 64-bit base seed plus an integer path.  The
same identity always reproduces the same draw sequence no matter which
thread or in which order it runs, which is what keeps federated
experiments replayable: the server and every (client, iteration) pair
own their own stream instead of sharing one mutable generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Identity of a reproducible random sequence."""

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if isinstance(self.path, int):
            object.__setattr__(self, "path", (self.path,))

    def child(self, *ids: int) -> "RngStream":
        """Derived stream; distinct paths never share draws."""
        return RngStream(self.seed, self.path + ids)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        entropy = (self.seed, *self.path)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(base_seed: int, index: int) -> int:
    """Stable 63-bit seed for run `index` of a repeated experiment."""
    ss = np.random.SeedSequence((base_seed, index))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
