"""Counter-based random streams.

Every Monte Carlo path owns a Philox stream keyed by ``(seed, path index)``.
The top counter word carries a *domain* tag so that, e.g., the cycles used for
Kesten diagnostics never share draws with the perpetuity paths of the same run.
Since a path's stream depends only on its key, results do not depend on how
paths are split across workers.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# domain tags (top word of the Philox counter)
PERPETUITY = 0
CYCLES = 1
DIRECT = 2
LOG_PRICE = 3
HORIZON = 4
AUX = 5


def _state(seed: int, index: int, domain: int) -> dict:
    return {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array([0, 0, 0, domain & MASK64], dtype=np.uint64),
            "key": np.array([seed & MASK64, index & MASK64], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }


def stream(seed: int, index: int = 0, domain: int = AUX) -> np.random.Generator:
    """Return a fresh generator for path ``index`` of ``seed`` in ``domain``."""
    bg = np.random.Philox(
        counter=[0, 0, 0, domain & MASK64],
        key=[seed & MASK64, index & MASK64],
    )
    return np.random.Generator(bg)


class StreamFactory:
    """Hands out per-path streams by rewinding one shared bit generator.

    Creating a Philox object costs about as much as simulating a short cycle,
    so hot loops reuse a single generator and only reset its key and counter.
    The generator returned by :meth:`__call__` is invalidated by the next call.
    """

    def __init__(self, seed: int, domain: int):
        self.seed = int(seed) & MASK64
        self.domain = int(domain)
        self._bg = np.random.Philox(key=[self.seed, 0])
        self._gen = np.random.Generator(self._bg)

    def __call__(self, index: int) -> np.random.Generator:
        self._bg.state = _state(self.seed, int(index), self.domain)
        return self._gen
