"""Reproducible, independent random streams keyed by ``(seed, stream_id)``."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

# stream purposes inside one simulation point
PILOT, SOURCE, NOISE, BINARY = 0, 1, 2, 3


@dataclass(frozen=True)
class RngStream:
    """Handle for a PCG64 stream.

    Identical ``(seed, stream_id, substream)`` always yield identical draws;
    distinct keys give streams that are independent for practical purposes
    (``SeedSequence`` spawn keys).
    """

    seed: int
    stream_id: int = 0
    substream: tuple = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed & (2**64 - 1),
            spawn_key=(self.stream_id & (2**64 - 1),) + tuple(self.substream),
        )
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.substream + tuple(keys))


def float_key(x: float) -> int:
    """Stable 64-bit integer key for a float (its IEEE-754 bit pattern)."""
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]
