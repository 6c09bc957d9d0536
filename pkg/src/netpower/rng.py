"""Deterministic, splittable random streams.

Every random quantity in the package is addressed by a :class:`StreamKey`:
a 64-bit master seed plus a path of ``(label, index)`` pairs such as
``(("rep", 17), ("perm", 0))``. The path is serialized and hashed with
BLAKE2b into a 64-bit stream key. Two generator families hang off a key:

* ``derive(key)`` returns a numpy ``Generator`` on PCG64 seeded from the
  stream key, for bulk draws (graph coordinates, edge coins).
* ``counter_uniforms(key, n)`` / ``uniform_rows(key, rows, n)`` are
  counter-based: element ``i`` of row ``r`` is a pure function of
  ``(key, r, i)`` (SplitMix64 output at counter ``i`` of a row key). Results
  do not depend on how work is split between workers.

Changing either algorithm changes every CSV the package produces.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels

MASK64 = (1 << 64) - 1


def _path_hash(master: int, path: tuple[tuple[str, int], ...]) -> int:
    h = hashlib.blake2b(digest_size=8, person=b"netpower")
    h.update(str(int(master) & MASK64).encode())
    for label, index in path:
        h.update(f"/{label}:{int(index)}".encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class StreamKey:
    master: int
    path: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master) <= MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.master}")

    def child(self, label: str, index: int = 0) -> StreamKey:
        return StreamKey(self.master, self.path + ((str(label), int(index)),))

    @cached_property
    def key(self) -> int:
        return _path_hash(self.master, self.path)

    def __str__(self) -> str:
        parts = "".join(f"/{lab}:{idx}" for lab, idx in self.path)
        return f"{self.master}{parts}"


def as_key(seed) -> StreamKey:
    """Accept an int seed or an existing key."""
    if isinstance(seed, StreamKey):
        return seed
    if isinstance(seed, (int, np.integer)):
        return StreamKey(int(seed))
    raise TypeError(f"expected int seed or StreamKey, got {type(seed).__name__}")


def derive(key) -> np.random.Generator:
    """PCG64 generator owned by the caller; same key, same stream."""
    return np.random.Generator(np.random.PCG64(as_key(key).key))


def counter_uniforms(key, n: int) -> np.ndarray:
    """``n`` uniforms on the open interval (0, 1), indexed by position."""
    return uniform_rows(key, np.zeros(1, dtype=np.int64), n)[0]


def uniform_rows(key, rows, n: int) -> np.ndarray:
    """Uniforms of shape ``(len(rows), n)``; row ``r`` is the counter stream ``rows[r]``."""
    rows = np.asarray(rows, dtype=np.int64)
    rk = kernels.row_keys(as_key(key).key, rows)
    return kernels.splitmix_uniforms(rk, int(n))


__all__ = ["StreamKey", "as_key", "derive", "counter_uniforms", "uniform_rows"]
