"""Keyed, stateless random streams.

Every stream is a pure function of a :class:`RandomKey`: the key is hashed
into a 128-bit Philox key and the stream is the counter sequence from zero.
Drawing a longer prefix never changes earlier values, so buffers can be
extended on demand without affecting reproducibility.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

MASK64 = (1 << 64) - 1


class Phase(enum.IntEnum):
    GENERIC = 0
    PRE_CUT_ORIGINAL = 1
    PRE_CUT_COUPLED = 2
    POST_CUT_SHARED = 3


@dataclass(frozen=True)
class RandomKey:
    master_seed: int
    component: int = 0
    phase: Phase = Phase.GENERIC
    replicate: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & MASK64)
        object.__setattr__(self, "phase", Phase(self.phase))

    def with_(self, **changes) -> "RandomKey":
        return replace(self, **changes)

    def philox_key(self) -> np.ndarray:
        entropy = [self.master_seed, int(self.phase), int(self.component), int(self.replicate)]
        return np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.philox_key()))

    def uniforms(self, n: int) -> np.ndarray:
        """First ``n`` values of the stream, uniform on ``[0, 1)``."""
        return self.generator().random(int(n))

    def pairs(self, n: int) -> np.ndarray:
        """First ``n`` (gap, height) uniform pairs, shape ``(n, 2)``."""
        return self.uniforms(2 * int(n)).reshape(-1, 2)


def replicate_key(master_seed: int, replicate: int) -> RandomKey:
    return RandomKey(master_seed, replicate=replicate)
