"""Randomization tests of hypothesized propagation/effect models.

Outcomes are first adjusted to what they would be under no experiment
according to the hypothesis; the Anderson-Darling k-sample statistic then
compares exposure groups, and its null distribution comes from fresh draws
of the assignment from the actual design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .design import Design, draw_assignments
from .errors import ConfigError, DegenerateError
from .exposure import D00, D01, D1, classify, classify_batch
from .graph import Graph
from .propagation import infection_probability
from .rng import as_key

ALL_THREE = "all3"
CONTROLS_ONLY = "controls"

# exposure condition -> group index; -1 drops the node from the comparison
_GROUP_MAPS = {
    ALL_THREE: {D1: 0, D00: 1, D01: 2},
    CONTROLS_ONLY: {D1: -1, D00: 0, D01: 1},
}

RELATIVE_TIE_TOL = 1e-12


@dataclass(frozen=True)
class NullSpec:
    """Which groups are compared, and which effect model is removed first.

    ``lam=None`` is the no-effect point of ``effect_kind``; outcomes are then
    left untouched and ``temperature`` is irrelevant.
    """

    kind: str = ALL_THREE
    lam: float | None = None
    temperature: float = math.inf
    effect_kind: str = "additive"

    def __post_init__(self):
        if self.kind not in _GROUP_MAPS:
            raise ConfigError(f"unknown null kind {self.kind!r}")
        if self.effect_kind not in ("additive", "multiplicative"):
            raise ConfigError(f"unknown effect kind {self.effect_kind!r}")
        if not self.temperature > 0:
            raise ConfigError("hypothesized temperature must lie in (0, inf]")

    @property
    def n_groups(self) -> int:
        return 3 if self.kind == ALL_THREE else 2


@dataclass(frozen=True, eq=False)
class PermutationResult:
    observed_stat: float
    null_stats: np.ndarray = field(repr=False)
    p_value: float
    group_sizes: tuple[int, ...] = ()
    attempts: int = 0

    @property
    def permutations(self) -> int:
        return int(self.null_stats.shape[0])


# -- statistic -----------------------------------------------------------------


def _tie_bounds(sorted_values: np.ndarray) -> np.ndarray:
    n = sorted_values.shape[0]
    starts = np.flatnonzero(np.r_[True, sorted_values[1:] != sorted_values[:-1]])
    return np.r_[starts, n].astype(np.int64)


def ad_ksample(groups, midrank: bool = True) -> float:
    """k-sample Anderson-Darling statistic (Scholz & Stephens).

    With ``midrank=True`` the tie-adjusted form A2akN is returned, otherwise
    A2kN. Scaling follows the published definitions (the ``1/N`` and
    ``(N-1)/N^2`` prefactors), which scipy's ``anderson_ksamp`` standardizes.
    """
    groups = [np.asarray(s, dtype=np.float64).ravel() for s in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(s.size == 0 for s in groups):
        raise ValueError("every group must be non-empty")
    pooled = np.concatenate(groups)
    if pooled.size < 3:
        raise ValueError("need at least three observations in total")
    labels = np.concatenate([np.full(s.size, g, dtype=np.int8) for g, s in enumerate(groups)])
    order = np.argsort(pooled, kind="stable")
    bounds = _tie_bounds(pooled[order])
    return float(kernels.ad_batch(bounds, labels[order][None, :], len(groups), midrank)[0])


# -- outcome adjustment --------------------------------------------------------------


def adjust_outcomes(y, z, g: Graph, lam: float | None, temperature: float = math.inf, effect_kind: str = "additive"):
    """Remove hypothesized effects from observed outcomes.

    Treated nodes are inverted exactly. Untreated nodes are inverted in
    expectation over the hypothesized one-step infection probability ``q``.
    """
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z)
    null_value = 1.0 if effect_kind == "multiplicative" else 0.0
    if lam is None or lam == null_value:
        return y.copy()
    if effect_kind == "multiplicative" and lam == 0:
        raise ConfigError("multiplicative hypothesis with lambda = 0 cannot be inverted")
    m = g.adjacency @ z.astype(np.int64)
    q = infection_probability(g.degrees, m, temperature)
    treated = z.astype(bool)
    if effect_kind == "multiplicative":
        return np.where(treated, y / lam, y / (1.0 + (lam - 1.0) * q))
    return np.where(treated, y - lam, y - lam * q)


# -- permutation test ----------------------------------------------------------------


def _group_table(kind: str, present: np.ndarray) -> tuple[np.ndarray, int]:
    """Lookup from condition code to compact group index over the compared conditions."""
    table = np.full(3, -1, dtype=np.int8)
    idx = 0
    for cond, grp in sorted(_GROUP_MAPS[kind].items(), key=lambda kv: kv[1]):
        if grp >= 0 and present[cond]:
            table[cond] = idx
            idx += 1
    return table, idx


def permutation_test(
    g: Graph,
    design: Design,
    y_observed,
    z_observed,
    null: NullSpec,
    permutations: int = 1000,
    seed=0,
    midrank: bool = True,
) -> PermutationResult:
    """Randomization p-value with the add-one rule.

    Compared groups are the null's groups that are non-empty under the
    observed assignment: the controls-only null needs both control groups,
    the all-three null at least two groups. Redraws in which a compared
    group is empty are discarded and replaced, up to ``10 * permutations``
    attempts.
    """
    if permutations < 99:
        raise ConfigError("use at least 99 permutations")
    y_adj = adjust_outcomes(y_observed, z_observed, g, null.lam, null.temperature, null.effect_kind)
    cond_obs = classify(g, z_observed)
    present = np.bincount(cond_obs, minlength=3) > 0
    table, k = _group_table(null.kind, present)
    if null.kind == CONTROLS_ONLY and not (present[D00] and present[D01]):
        raise DegenerateError("controls-only test needs both d00 and d01 nodes")
    if k < 2:
        raise DegenerateError(f"only {k} non-empty exposure group(s) to compare")

    lab_obs = table[cond_obs]
    compared = lab_obs >= 0
    if int(compared.sum()) < 3:
        raise DegenerateError("fewer than three compared observations")
    # observed statistic only ever sees the compared nodes' outcomes
    y_cmp = y_adj[compared]
    sub = np.argsort(y_cmp, kind="stable")
    observed = float(kernels.ad_batch(_tie_bounds(y_cmp[sub]), lab_obs[compared][sub][None, :], k, midrank)[0])

    order = np.argsort(y_adj, kind="stable")
    bounds = _tie_bounds(y_adj[order])

    key = as_key(seed)
    max_attempts = 10 * permutations
    kept = []
    n_kept = 0
    attempts = 0
    while n_kept < permutations:
        if attempts >= max_attempts:
            raise DegenerateError(
                f"only {n_kept} of {attempts} redraws had every compared group non-empty"
            )
        need = permutations - n_kept
        batch = min(max_attempts - attempts, max(need if attempts == 0 else 2 * need, 64))
        rows = np.arange(attempts, attempts + batch)
        attempts += batch
        lab = table[classify_batch(g, draw_assignments(design, g, key, rows))]
        counts = np.stack([(lab == j).sum(axis=1) for j in range(k)], axis=1)
        ok = np.all(counts > 0, axis=1)
        good = lab[ok][:need]
        if good.shape[0]:
            kept.append(good)
            n_kept += good.shape[0]
    lab_perm = np.concatenate(kept)[:, order]
    null_stats = kernels.ad_batch(bounds, np.ascontiguousarray(lab_perm), k, midrank)
    thresh = observed - RELATIVE_TIE_TOL * abs(observed)
    p = (1.0 + np.count_nonzero(null_stats >= thresh)) / (1.0 + permutations)
    sizes = tuple(int((lab_obs == j).sum()) for j in range(k))
    return PermutationResult(observed, null_stats, float(p), sizes, attempts)
