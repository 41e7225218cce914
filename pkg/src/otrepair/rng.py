"""Index-addressable random streams.

Every draw used by the repair is identified by ``(seed, u, s, k, kind,
record index)``. A stream per ``(u, s, k, kind)`` is a counter-based Philox
generator, and a record's draw is read at its index, so results do not
depend on batch boundaries or the order in which records are processed.
"""

from __future__ import annotations

import numpy as np

BERNOULLI = 0
COLUMN = 1

_MASK64 = (1 << 64) - 1
# Philox emits four 64-bit words per counter step; advance() counts steps
_WORDS_PER_STEP = 4


class RepairRng:
    """Deterministic uniforms keyed by ``(u, s, k, kind)`` and record index."""

    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0:
            seed &= _MASK64
        self.seed = seed

    def __repr__(self):
        return f"RepairRng(seed={self.seed})"

    def _bitgen(self, u, s, k, kind):
        ss = np.random.SeedSequence([self.seed, int(u), int(s), int(k), int(kind)])
        return np.random.Philox(ss)

    def uniforms(self, u, s, k, kind, indices) -> np.ndarray:
        """Uniform [0, 1) draws at the given record indices of one stream."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            return np.empty(0)
        if idx.min() < 0:
            raise ValueError("record indices must be nonnegative")
        start = int(idx.min()) // _WORDS_PER_STEP
        base = start * _WORDS_PER_STEP
        bg = self._bitgen(u, s, k, kind)
        bg.advance(start)
        block = np.random.Generator(bg).random(int(idx.max()) - base + 1)
        return block[idx - base]
