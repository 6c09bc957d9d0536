"""Treatment-assignment laws and exposure-condition probabilities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, TiltImpossibleError, UndefinedCorrelationError, UnsupportedDesignError
from .exposure import D00, D01, D1, ExposureCondition, classify_batch
from .graph import Graph
from .rng import as_key, uniform_rows

P_MIN, P_MAX = 0.01, 0.99


@dataclass(frozen=True)
class Bernoulli:
    alpha: float

    kind = "bernoulli"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class CompleteCount:
    n_treated: int

    kind = "complete"

    def __post_init__(self):
        if self.n_treated < 1:
            raise ConfigError(f"n_treated must be positive, got {self.n_treated}")


@dataclass(frozen=True)
class DegreeTilted:
    """Independent draws with probability tilted along standardized degree."""

    alpha: float
    gamma: float

    kind = "degree-tilted"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")


Design = Union[Bernoulli, CompleteCount, DegreeTilted]


def is_independent(d: Design) -> bool:
    return isinstance(d, (Bernoulli, DegreeTilted))


def design_alpha(d: Design, n: int) -> float:
    if isinstance(d, CompleteCount):
        return d.n_treated / n
    return d.alpha


def tilted_probabilities(alpha: float, gamma: float, degrees) -> np.ndarray:
    k = np.asarray(degrees, dtype=np.float64)
    if gamma == 0.0:
        return np.full(k.shape, alpha)
    sd = k.std()
    if sd == 0.0:
        raise TiltImpossibleError("degree tilt needs non-constant degrees (graph is regular)")
    p = np.clip(alpha + gamma * (k - k.mean()) / sd, P_MIN, P_MAX)
    # one additive re-centering pass, then clamp again
    return np.clip(p + (alpha - p.mean()), P_MIN, P_MAX)


def inclusion_probabilities(d: Design, g: Graph) -> np.ndarray:
    """``P(Z_i = 1)`` for each node."""
    _check(d, g)
    if isinstance(d, Bernoulli):
        return np.full(g.n, d.alpha)
    if isinstance(d, CompleteCount):
        return np.full(g.n, d.n_treated / g.n)
    return tilted_probabilities(d.alpha, d.gamma, g.degrees)


def _check(d: Design, g: Graph) -> None:
    if isinstance(d, CompleteCount) and not d.n_treated < g.n:
        raise ConfigError(f"n_treated={d.n_treated} must be below n={g.n}")


def draw_assignments(d: Design, g: Graph, seed, rows) -> np.ndarray:
    """Assignment vectors for counter rows ``rows``; shape ``(len(rows), n)``, ``int8``."""
    p = inclusion_probabilities(d, g)
    u = uniform_rows(seed, rows, g.n)
    if isinstance(d, CompleteCount):
        z = np.zeros(u.shape, dtype=np.int8)
        picked = np.argpartition(u, d.n_treated - 1, axis=1)[:, : d.n_treated]
        np.put_along_axis(z, picked, 1, axis=1)
        return z
    return (u < p[None, :]).astype(np.int8)


def draw_assignment(d: Design, g: Graph, seed) -> np.ndarray:
    return draw_assignments(d, g, seed, [0])[0]


# -- marginal exposure probabilities -------------------------------------------


def exposure_probs_closed_form(d: Design, g: Graph) -> np.ndarray:
    """``(n, 3)`` matrix of ``pi_i(d_k)``, columns ordered d1, d00, d01."""
    if not is_independent(d):
        raise UnsupportedDesignError(
            f"closed-form exposure probabilities need independent coordinates; {d.kind} is not"
        )
    p = inclusion_probabilities(d, g)
    s = g.adjacency @ np.log1p(-p)  # log P(no neighbour treated)
    out = np.empty((g.n, 3))
    out[:, D1] = p
    out[:, D00] = (1.0 - p) * np.exp(s)
    out[:, D01] = (1.0 - p) * -np.expm1(s)
    return out


def exposure_probs_monte_carlo(d: Design, g: Graph, replications: int, seed, chunk: int = 4096) -> np.ndarray:
    """Empirical condition frequencies per node over ``replications`` design draws."""
    if replications < 1:
        raise ConfigError("replications must be at least 1")
    key = as_key(seed)
    counts = np.zeros((g.n, 3), dtype=np.int64)
    for start in range(0, replications, chunk):
        rows = np.arange(start, min(start + chunk, replications))
        cond = classify_batch(g, draw_assignments(d, g, key, rows))
        for c in (D1, D00, D01):
            counts[:, c] += (cond == c).sum(axis=0)
    return counts / replications


def exposure_probs(d: Design, g: Graph, replications: int = 100_000, seed=0) -> np.ndarray:
    if is_independent(d):
        return exposure_probs_closed_form(d, g)
    return exposure_probs_monte_carlo(d, g, replications, seed)


# -- joint exposure probabilities ----------------------------------------------


@dataclass(frozen=True, eq=False)
class JointExposure:
    """Marginal and pairwise exposure probabilities needed for variance estimation.

    ``joint[(k, l)][i, j] = P(D_i = k, D_j = l)``; ``zero[(k, l)]`` marks pairs that
    can never co-occur (diagonal included).
    """

    pi: np.ndarray
    joint: dict
    zero: dict
    method: str

    def pair(self, k: ExposureCondition, l: ExposureCondition) -> tuple[np.ndarray, np.ndarray]:
        if (k, l) in self.joint:
            return self.joint[(k, l)], self.zero[(k, l)]
        j, z = self.joint[(l, k)], self.zero[(l, k)]
        return j.T, z.T


# each condition indicator as a signed sum of "all untreated on a set" events,
# set types: E = empty, S = {i}, C = closed neighbourhood of i
_EXPANSION = {
    D1: ((1.0, "E"), (-1.0, "S")),
    D01: ((1.0, "S"), (-1.0, "C")),
    D00: ((1.0, "C"),),
}


def _closed_form_joint(p: np.ndarray, g: Graph, pairs) -> dict:
    n = g.n
    adj = g.adjacency.astype(np.float64)
    closed = (adj + sp.identity(n, format="csr")).tocsr()
    w = np.log1p(-p)
    logp = {"E": np.zeros(n), "S": w, "C": w + adj @ w}
    inter_sc = closed.multiply(w[:, None]).toarray()
    inter = {
        ("S", "S"): np.diag(w),
        ("S", "C"): inter_sc,
        ("C", "S"): inter_sc.T,
        ("C", "C"): (closed @ sp.diags(w) @ closed).toarray(),
    }
    out = {}
    for k, l in pairs:
        acc = np.zeros((n, n))
        for sa, a in _EXPANSION[k]:
            for sb, b in _EXPANSION[l]:
                x = logp[a][:, None] + logp[b][None, :]
                if (a, b) in inter:
                    x = x - inter[(a, b)]
                acc += sa * sb * np.exp(x)
        out[(k, l)] = acc
    return out


def _structural_zeros(g: Graph, pi: np.ndarray, pairs) -> dict:
    """Pairs of events that are logically incompatible under an independent design."""
    n = g.n
    adj = g.adjacency
    a = adj.toarray().astype(np.int64)
    deg = g.degrees
    closed = a + np.eye(n, dtype=np.int64)
    eye = np.eye(n, dtype=bool)
    out = {}
    for k, l in pairs:
        if k == l:
            z = np.zeros((n, n), dtype=bool)
        else:
            z = eye.copy()
        key = {k, l}
        if key == {D1, D00}:
            z |= closed.astype(bool)
        elif key == {D01, D00}:
            # d01 at i and d00 at j need a treated neighbour of i outside N[j]
            outside = deg[:, None] - (adj @ sp.csr_matrix(closed)).toarray()
            zz = outside == 0
            z |= zz if k == D01 else zz.T
        elif k == l == D01:
            spare = deg[:, None] - a
            z |= ((spare == 0) | (spare.T == 0)) & ~eye
        z |= (pi[:, k] == 0.0)[:, None] | (pi[:, l] == 0.0)[None, :]
        out[(k, l)] = z
    return out


def _monte_carlo_joint(d: Design, g: Graph, pairs, replications: int, seed, chunk: int = 2048):
    key = as_key(seed).child("joint")
    n = g.n
    sums = {pl: np.zeros((n, n)) for pl in pairs}
    counts = np.zeros((n, 3))
    for start in range(0, replications, chunk):
        rows = np.arange(start, min(start + chunk, replications))
        cond = classify_batch(g, draw_assignments(d, g, key, rows))
        ind = {c: (cond == c).astype(np.float64) for c in (D1, D00, D01)}
        for c in (D1, D00, D01):
            counts[:, c] += ind[c].sum(axis=0)
        for k, l in pairs:
            sums[(k, l)] += ind[k].T @ ind[l]
    joint = {pl: s / replications for pl, s in sums.items()}
    zero = {pl: s == 0 for pl, s in sums.items()}
    return counts / replications, joint, zero


def joint_exposure_probs(
    d: Design,
    g: Graph,
    conditions=(D01, D00),
    method: str = "mc",
    replications: int = 10_000,
    seed=0,
) -> JointExposure:
    """Pairwise exposure probabilities for every ordered pair of ``conditions``.

    ``method="mc"`` estimates them from ``replications`` design draws; pairs
    never observed together are treated as impossible. Marginals are exact
    whenever the design allows it. ``method="closed"`` (independent designs
    only) is exact throughout.
    """
    conds = tuple(dict.fromkeys(ExposureCondition(c) for c in conditions))
    pairs = [(k, l) for k in conds for l in conds]
    if method == "closed":
        pi = exposure_probs_closed_form(d, g)
        joint = _closed_form_joint(inclusion_probabilities(d, g), g, pairs)
        zero = _structural_zeros(g, pi, pairs)
        for pl in pairs:
            j = joint[pl]
            j[zero[pl]] = 0.0
            np.maximum(j, np.where(zero[pl], 0.0, np.finfo(float).tiny), out=j)
        return JointExposure(pi, joint, zero, "closed")
    if method == "mc":
        if replications < 1:
            raise ConfigError("replications must be at least 1")
        pi, joint, zero = _monte_carlo_joint(d, g, pairs, replications, seed)
        if is_independent(d):
            pi = exposure_probs_closed_form(d, g)
        return JointExposure(pi, joint, zero, "mc")
    raise ConfigError(f"unknown joint-probability method {method!r}")


# -- degree/treatment association --------------------------------------------


def realized_degree_correlation(z, g: Graph) -> float:
    """Pearson correlation between node degree and the realized assignment."""
    z = np.asarray(z, dtype=np.float64)
    k = g.degrees.astype(np.float64)
    if np.all(z == z[0]):
        raise UndefinedCorrelationError("assignment is constant")
    if np.all(k == k[0]):
        raise UndefinedCorrelationError("degrees are constant")
    zc = z - z.mean()
    kc = k - k.mean()
    return float(np.dot(zc, kc) / np.sqrt(np.dot(zc, zc) * np.dot(kc, kc)))


def degree_correlations(z: np.ndarray, g: Graph) -> np.ndarray:
    """Row-wise version of :func:`realized_degree_correlation`; NaN where undefined."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    k = g.degrees.astype(np.float64)
    kc = k - k.mean()
    zc = z - z.mean(axis=1, keepdims=True)
    den = np.sqrt((zc * zc).sum(axis=1) * np.dot(kc, kc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (zc @ kc) / den
    return np.where(den > 0, r, np.nan)
