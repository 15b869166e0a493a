"""Counter-based random streams.

Every draw in the package goes through a Philox4x64-10 generator keyed by
``(seed, stream_id)``; distinct keys give independent streams without any
coordination between workers.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

PRNG_ALGORITHM = "numpy.random.Philox(4x64-10), key=(seed, stream_id)"

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _U64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {v}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *parts) -> "RngStream":
        """A new stream under the same seed whose id is derived from parts."""
        return RngStream(self.seed, derive_stream_id(self.stream_id, *parts))


def derive_stream_id(*parts) -> int:
    """Stable 64-bit hash of ints/floats/strings (independent of PYTHONHASHSEED)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, bool):
            h.update(b"b" + bytes([p]))
        elif isinstance(p, int):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, float):
            h.update(b"f" + struct.pack("<d", p))
        else:
            h.update(b"s" + str(p).encode())
        h.update(b"|")
    return int.from_bytes(h.digest(), "little")


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")
