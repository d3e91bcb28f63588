"""Labeled, reproducible random substreams.

Every random draw in the simulator comes from a stream addressed by
``(seed, label)``. Streams are backed by the counter-based Philox generator
keyed with a hash of the address, so the emitted sequence depends only on the
address and never on the order in which other streams were created or
consumed. That property is what keeps parallel sweeps bit-reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def _philox_key(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


class RngStream:
    """A named random stream: a pure function of ``(seed, label)``.

    The underlying generator is created lazily; a stream instance is meant to
    be consumed by a single owner. Derived streams (``substream``) are fully
    independent and may be handed to parallel workers.
    """

    def __init__(self, seed: int, label: str):
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
        if not 0 <= seed <= MAX_SEED:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.label = label
        self._generator: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            self._generator = np.random.Generator(
                np.random.Philox(key=_philox_key(self.seed, self.label))
            )
        return self._generator

    def substream(self, suffix: str | int) -> "RngStream":
        """Derive an independent stream addressed by ``label/suffix``."""
        return RngStream(self.seed, f"{self.label}/{suffix}")

    def random(self, n: int | None = None):
        return self.generator.random(n)

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers on the closed interval [low, high]."""
        return self.generator.integers(low, high, size, endpoint=True)

    def normal(self, loc: float, scale: float, size=None):
        return self.generator.normal(loc, scale, size)

    def choice_index(self, n: int) -> int:
        return int(self.generator.integers(0, n))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"


def rng_stream(seed: int, label: str) -> RngStream:
    """Return the stream addressed by ``(seed, label)``."""
    return RngStream(seed, label)
