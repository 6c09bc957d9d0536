"""Exposure conditions from the assignment vector and adjacency.

A node is ``d1`` when directly treated, ``d01`` when untreated with at least
one treated neighbour, and ``d00`` otherwise. Only the t=0 assignment is
used: realized infection is not observable to the analyst.
"""

from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import kernels
from .graph import Graph


class ExposureCondition(IntEnum):
    D1 = 0
    D00 = 1
    D01 = 2

    @property
    def label(self) -> str:
        return LABELS[self]

    @classmethod
    def parse(cls, text: str) -> ExposureCondition:
        try:
            return cls(LABELS.index(text.strip().lower()))
        except ValueError:
            raise ValueError(f"unknown exposure condition {text!r}; use one of {LABELS}") from None


D1 = ExposureCondition.D1
D00 = ExposureCondition.D00
D01 = ExposureCondition.D01
LABELS = ("d1", "d00", "d01")


class ConditionCounts(NamedTuple):
    d1: int
    d01: int
    d00: int


def classify(g: Graph, z) -> np.ndarray:
    """Condition code per node (``int8``; see :class:`ExposureCondition`)."""
    z = np.asarray(z)
    if z.ndim != 1 or z.shape[0] != g.n:
        raise ValueError(f"assignment has length {z.shape[0] if z.ndim else 0}, graph has {g.n} nodes")
    return classify_batch(g, z[None, :])[0]


def classify_batch(g: Graph, z: np.ndarray) -> np.ndarray:
    """Classify each row of a ``(rows, n)`` 0/1 assignment matrix."""
    z = np.ascontiguousarray(z, dtype=np.int8)
    m = kernels.neighbor_counts(g.indptr, g.indices, z)
    out = np.where(m > 0, np.int8(D01), np.int8(D00)).astype(np.int8)
    out[z == 1] = D1
    return out


def condition_counts(conditions) -> ConditionCounts:
    c = np.bincount(np.asarray(conditions, dtype=np.int64), minlength=3)
    return ConditionCounts(d1=int(c[D1]), d01=int(c[D01]), d00=int(c[D00]))


def labels(conditions) -> list[str]:
    return [LABELS[c] for c in np.asarray(conditions).tolist()]
