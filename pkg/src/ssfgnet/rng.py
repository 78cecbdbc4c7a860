"""Named, seedable random streams.

Every stochastic component (factor sampling, dropout masks, weight init,
data generation, shuffling) pulls an independent generator derived from
one experiment seed plus a string label. Streams are independent of each
other, so enabling or disabling one consumer never shifts the randomness
seen by the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(labels: tuple) -> tuple[int, ...]:
    # Stable across processes (unlike hash()), so runs are reproducible.
    digest = hashlib.sha256("\x1f".join(str(l) for l in labels).encode()).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def stream(seed: int, *labels) -> np.random.Generator:
    """Return the generator for (seed, labels). Same inputs, same stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_label_words(labels))
    return np.random.default_rng(ss)


class RngHub:
    """Hands out named streams for one experiment run."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, *labels) -> np.random.Generator:
        return stream(self.seed, *labels)
