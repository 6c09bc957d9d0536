"""Treatment propagation: Ising-type stochastic infection and perfect one-hop spread."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .errors import ConfigError
from .graph import Graph
from .rng import as_key, uniform_rows


@dataclass(frozen=True)
class Ising:
    temperature: float
    steps: int = 1
    require_treated_neighbor: bool = False

    kind = "ising"

    def __post_init__(self):
        if not self.temperature >= 0.0:
            raise ConfigError(f"temperature must be non-negative, got {self.temperature}")
        if self.steps < 1:
            raise ConfigError(f"steps must be at least 1, got {self.steps}")


@dataclass(frozen=True)
class Perfect:
    steps: int = 1

    kind = "perfect"

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be at least 1, got {self.steps}")


PropagationModel = Union[Ising, Perfect]


@dataclass(frozen=True, eq=False)
class InfectionState:
    exposed: np.ndarray
    t: int = 0


def infection_probability(k, m, temperature: float):
    """``1 / (1 + exp((2/F) (k - 2m)))``; at ``F = 0`` the pointwise limit.

    Vectorized over ``k`` and ``m``. ``F = inf`` gives 0.5 everywhere.
    """
    k = np.asarray(k, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if np.any(m > k) or np.any(m < 0):
        raise ValueError("exposed-neighbour count must satisfy 0 <= m <= k")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    x = k - 2.0 * m
    if temperature == 0.0:
        out = np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5))
    elif math.isinf(temperature):
        out = np.full(np.broadcast(k, m).shape, 0.5)
    else:
        # 1/(1+e^a) written to avoid overflow for large |a|
        # x = 0 is pinned so a denormal F (2/F = inf) cannot produce inf * 0
        with np.errstate(over="ignore", invalid="ignore"):
            a = np.where(x == 0, 0.0, (2.0 / temperature) * x)
        e = np.exp(-np.abs(a))
        out = np.where(a > 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return out if out.ndim else float(out)


def step_batch(g: Graph, exposed: np.ndarray, t: int, model: PropagationModel, seed, rows) -> np.ndarray:
    """Advance each row of ``exposed`` (shape ``(rows, n)``) by one synchronous step.

    Node ``i`` of counter row ``r`` draws its coin from the stream
    ``seed/t:<t>`` at position ``(rows[r], i)``.
    """
    exposed = np.ascontiguousarray(exposed, dtype=np.int8)
    m = kernels.neighbor_counts(g.indptr, g.indices, exposed)
    if isinstance(model, Perfect):
        new = (m > 0).astype(np.int8)
    else:
        q = infection_probability(np.broadcast_to(g.degrees, m.shape), m, model.temperature)
        u = uniform_rows(as_key(seed).child("t", t), rows, g.n)
        new = (u < q).astype(np.int8)
        if model.require_treated_neighbor:
            new &= (m > 0).astype(np.int8)
    return exposed | new


def step(g: Graph, s: InfectionState, model: PropagationModel, seed) -> InfectionState:
    nxt = step_batch(g, s.exposed[None, :], s.t + 1, model, seed, [0])[0]
    return InfectionState(nxt, s.t + 1)


def run(g: Graph, z, model: PropagationModel, seed) -> InfectionState:
    z = np.asarray(z, dtype=np.int8)
    if z.shape != (g.n,):
        raise ValueError(f"assignment has shape {z.shape}, expected ({g.n},)")
    s = InfectionState(z.copy(), 0)
    for _ in range(model.steps):
        s = step(g, s, model, seed)
    return s


def run_batch(g: Graph, z: np.ndarray, model: PropagationModel, seed, rows) -> np.ndarray:
    """Final exposure for many assignments at once; row ``r`` matches ``run`` with row key ``rows[r]``."""
    exposed = np.asarray(z, dtype=np.int8)
    for t in range(1, model.steps + 1):
        exposed = step_batch(g, exposed, t, model, seed, rows)
    return exposed
