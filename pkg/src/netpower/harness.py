"""Replicated power simulations over a grid of scenarios.

One replicate is: draw an assignment, propagate, draw baselines, realize
outcomes, then run every requested test at level 0.05. Random streams are
keyed by (master seed, replicate) and a role label only, so every cell of a
grid sees the same uniforms for a given replicate. Assignments are therefore
nested across alpha, propagation coins are shared across temperatures, and
outcome noise is shared across effect sizes. Results never depend on how
cells and replicates are spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context

import numpy as np

from .design import (
    Bernoulli,
    CompleteCount,
    DegreeTilted,
    Design,
    degree_correlations,
    draw_assignments,
    joint_exposure_probs,
)
from .errors import ConfigError, DegenerateError
from .estimators import DEFAULT_CONTRAST, VarianceKernel, hajek_tau, ht_tau, wald_p_values
from .exposure import D00, D01, D1, classify_batch
from .graph import Graph, GraphProfile
from .outcomes import effect_model
from .propagation import Ising, Perfect, PropagationModel, run_batch
from .ritest import ALL_THREE, CONTROLS_ONLY, NullSpec, permutation_test
from .rng import StreamKey, as_key, uniform_rows

LEVEL = 0.05
TESTS = ("ht_wald", "hajek_wald", "ri_all3", "ri_controls")
DESIGNS = ("bernoulli", "complete", "degree-tilted")
PROPAGATIONS = ("ising", "perfect")
EFFECTS = ("additive", "multiplicative")
JOINT_REPLICATIONS = 10_000
CHUNK = 25  # replicates per work unit; fixed so results do not depend on workers

POWER_HEADER = (
    "design,alpha,gamma,propagation,temperature,effect,lambda,test,replicates,excluded,"
    "power,mc_se,mean_n_d1,mean_n_d01,mean_n_d00,mean_degcor"
)
DEGCOR_HEADER = "gamma,bin_lo,bin_hi,bin_mid,replicates,rejections,power,mc_se,mean_degcor"
DEGCOR_BIN = 0.05


# -- scenarios -----------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One cell of the grid. ``lam=None`` is the effect model's no-effect point."""

    design: str = "bernoulli"
    alpha: float = 0.05
    gamma: float = 0.0
    propagation: str = "ising"
    temperature: float | None = 50.0
    effect: str = "additive"
    lam: float | None = 0.63
    steps: int = 1
    require_treated_neighbor: bool = False

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigError(f"unknown design {self.design!r}")
        if self.propagation not in PROPAGATIONS:
            raise ConfigError(f"unknown propagation {self.propagation!r}")
        if self.propagation == "ising" and self.temperature is None:
            raise ConfigError("ising propagation needs a temperature")
        effect_model(self.effect, self.lam)  # validates kind and lambda

    def make_design(self, n: int) -> Design:
        if self.design == "bernoulli":
            return Bernoulli(self.alpha)
        if self.design == "complete":
            return CompleteCount(max(1, int(round(self.alpha * n))))
        return DegreeTilted(self.alpha, self.gamma)

    def make_propagation(self) -> PropagationModel:
        if self.propagation == "perfect":
            return Perfect(self.steps)
        return Ising(float(self.temperature), self.steps, self.require_treated_neighbor)

    def make_effect(self):
        return effect_model(self.effect, self.lam)


@dataclass(frozen=True)
class ScenarioGrid:
    alphas: tuple = (0.05, 0.25, 0.50)
    temperatures: tuple = (10.0, 50.0, 100.0)
    lambdas: tuple = (0.26, 0.63)
    effect_kinds: tuple = ("multiplicative", "additive")
    propagation_kinds: tuple = ("ising", "perfect")
    designs: tuple = ("bernoulli",)
    tests: tuple = TESTS
    replicates: int = 200
    permutations: int = 500
    seed: int = 0
    gammas: tuple = (0.0,)
    steps: int = 1
    require_treated_neighbor: bool = False
    joint_method: str = "mc"

    def __post_init__(self):
        for name in ("alphas", "temperatures", "lambdas", "effect_kinds", "propagation_kinds", "designs", "tests", "gammas"):
            value = tuple(getattr(self, name))
            if not value:
                raise ConfigError(f"grid.{name} must not be empty")
            object.__setattr__(self, name, value)
        bad = set(self.tests) - set(TESTS)
        if bad:
            raise ConfigError(f"unknown tests {sorted(bad)}; choose from {list(TESTS)}")
        if self.replicates < 1:
            raise ConfigError("grid.replicates must be at least 1")
        if any(t in self.tests for t in ("ri_all3", "ri_controls")) and self.permutations < 99:
            raise ConfigError("grid.permutations must be at least 99")

    def scenarios(self) -> list[Scenario]:
        """Cartesian product in a fixed order; perfect propagation has no temperature axis."""
        out = []
        for design, alpha in itertools.product(self.designs, self.alphas):
            gammas = self.gammas if design == "degree-tilted" else (0.0,)
            for gamma, prop in itertools.product(gammas, self.propagation_kinds):
                temps = self.temperatures if prop == "ising" else (None,)
                for temp, eff, lam in itertools.product(temps, self.effect_kinds, self.lambdas):
                    out.append(
                        Scenario(design, float(alpha), float(gamma), prop, temp, eff, lam,
                                 self.steps, self.require_treated_neighbor)
                    )
        return out


PRESETS = {
    "desk": dict(
        graph=GraphProfile(868, 0.022),
        grid=ScenarioGrid(),
    ),
    "paper": dict(
        graph=GraphProfile(868, 0.022),
        grid=ScenarioGrid(
            alphas=tuple(round(0.05 * i, 2) for i in range(1, 11)),
            temperatures=tuple(float(10 * i) for i in range(11)),
            replicates=1000,
            permutations=1000,
        ),
    ),
}


def preset(name: str) -> dict:
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# -- one cell ------------------------------------------------------------------


@dataclass
class CellResult:
    """Per-test rejection tallies plus sums needed for the mean columns."""

    scenario: Scenario
    tests: tuple
    rejections: dict = field(default_factory=dict)
    valid: dict = field(default_factory=dict)
    total: int = 0
    sum_counts: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sum_degcor: float = 0.0
    n_degcor: int = 0

    def merge(self, other: CellResult) -> None:
        for t in self.tests:
            self.rejections[t] = self.rejections.get(t, 0) + other.rejections.get(t, 0)
            self.valid[t] = self.valid.get(t, 0) + other.valid.get(t, 0)
        self.total += other.total
        self.sum_counts = self.sum_counts + other.sum_counts
        self.sum_degcor += other.sum_degcor
        self.n_degcor += other.n_degcor

    def power(self, test: str) -> float:
        v = self.valid.get(test, 0)
        return self.rejections.get(test, 0) / v if v else math.nan

    def mc_se(self, test: str) -> float:
        v = self.valid.get(test, 0)
        p = self.power(test)
        return math.sqrt(p * (1.0 - p) / v) if v else math.nan


@dataclass(frozen=True)
class ReplicateBatch:
    """Everything observed in a block of replicates of one cell."""

    z: np.ndarray
    conditions: np.ndarray
    y: np.ndarray
    rows: np.ndarray


class _Context:
    """Cache of variance kernels, one per design.

    Joint exposure probabilities come from ``JOINT_REPLICATIONS`` design
    draws on a stream of their own, so they are the same in every cell.
    """

    def __init__(self, g: Graph, seed=0, joint_method: str = "mc"):
        self.g = g
        self.key = as_key(seed).child("joint")
        self.joint_method = joint_method
        self._kernels = {}

    def kernel(self, design: Design) -> VarianceKernel:
        if design not in self._kernels:
            joint = joint_exposure_probs(
                design, self.g, method=self.joint_method, replications=JOINT_REPLICATIONS, seed=self.key
            )
            self._kernels[design] = VarianceKernel(joint, DEFAULT_CONTRAST)
        return self._kernels[design]


def simulate(g: Graph, scenario: Scenario, seed, rows) -> ReplicateBatch:
    """Assignment, propagation and outcomes for replicates ``rows``."""
    key = as_key(seed)
    rows = np.asarray(rows, dtype=np.int64)
    z = draw_assignments(scenario.make_design(g.n), g, key.child("z"), rows)
    exposed = run_batch(g, z, scenario.make_propagation(), key.child("prop"), rows)
    baseline = uniform_rows(key.child("y0"), rows, g.n)
    y = scenario.make_effect().apply(baseline, exposed)
    return ReplicateBatch(z, classify_batch(g, z), y, rows)


def _wald_rejections(kern: VarianceKernel, batch: ReplicateBatch, estimator: str) -> tuple[np.ndarray, np.ndarray]:
    c = batch.conditions
    ok = ((c == D01).any(axis=1)) & ((c == D00).any(axis=1))
    reject = np.zeros(c.shape[0], dtype=bool)
    if ok.any():
        y, cc = batch.y[ok], c[ok]
        if estimator == "ht":
            tau, var = ht_tau(y, cc, kern.pi), kern.ht_variance(y, cc)
        else:
            tau, var = hajek_tau(y, cc, kern.pi), kern.hajek_variance(y, cc)
        reject[ok] = wald_p_values(tau, var) < LEVEL
    return ok, reject


def _ri_rejections(g, design, batch: ReplicateBatch, kind: str, permutations: int, key: StreamKey):
    n = batch.y.shape[0]
    ok = np.zeros(n, dtype=bool)
    reject = np.zeros(n, dtype=bool)
    null = NullSpec(kind)
    for i in range(n):
        try:
            res = permutation_test(
                g, design, batch.y[i], batch.z[i], null, permutations, key.child("perm", int(batch.rows[i]))
            )
        except DegenerateError:
            continue
        ok[i] = True
        reject[i] = res.p_value < LEVEL
    return ok, reject


def run_block(g: Graph, scenario: Scenario, tests, replicates_rows, permutations: int, seed, ctx: _Context | None = None) -> CellResult:
    """Run one block of replicates of a cell and tally rejections."""
    ctx = ctx or _Context(g, seed)
    key = as_key(seed)
    design = scenario.make_design(g.n)
    batch = simulate(g, scenario, key, replicates_rows)
    res = CellResult(scenario, tuple(tests))
    res.total = batch.y.shape[0]
    counts = np.stack([(batch.conditions == c).sum(axis=1) for c in (D1, D01, D00)], axis=1)
    res.sum_counts = counts.sum(axis=0).astype(np.float64)
    r = degree_correlations(batch.z, g)
    res.sum_degcor = float(np.nansum(r))
    res.n_degcor = int(np.isfinite(r).sum())
    for test in tests:
        if test in ("ht_wald", "hajek_wald"):
            ok, rej = _wald_rejections(ctx.kernel(design), batch, test.split("_")[0])
        else:
            kind = ALL_THREE if test == "ri_all3" else CONTROLS_ONLY
            ok, rej = _ri_rejections(g, design, batch, kind, permutations, key)
        res.valid[test] = int(ok.sum())
        res.rejections[test] = int(rej.sum())
    return res


def run_cell(
    g: Graph,
    scenario: Scenario,
    tests=TESTS,
    replicates: int = 200,
    permutations: int = 500,
    seed=0,
    joint_method: str = "mc",
) -> CellResult:
    """All replicates of one scenario, in fixed-size blocks merged in order."""
    ctx = _Context(g, seed, joint_method)
    out = CellResult(scenario, tuple(tests))
    for start in range(0, replicates, CHUNK):
        rows = np.arange(start, min(start + CHUNK, replicates))
        out.merge(run_block(g, scenario, tests, rows, permutations, seed, ctx))
    return out


# -- grid driver ---------------------------------------------------------------

_WORKER: dict = {}


def _execute(fn, units, ctx: _Context, workers: int) -> list:
    """Map ``fn`` over ``units`` in order. Forked workers inherit ``ctx``."""
    _WORKER["ctx"] = ctx
    if workers <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(min(workers, len(units)), mp_context=get_context("fork")) as ex:
        return list(ex.map(fn, units))


def _run_unit(args):
    scenario, tests, rows, permutations, seed = args
    ctx = _WORKER["ctx"]
    return run_block(ctx.g, scenario, tests, rows, permutations, seed, ctx)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass
class PowerTable:
    seed: int
    cells: list

    def rows(self):
        for cell in self.cells:
            sc = cell.scenario
            lam = sc.make_effect().lam
            for test in cell.tests:
                means = cell.sum_counts / cell.total
                degcor = cell.sum_degcor / cell.n_degcor if cell.n_degcor else math.nan
                yield {
                    "design": sc.design,
                    "alpha": sc.alpha,
                    "gamma": sc.gamma if sc.design == "degree-tilted" else None,
                    "propagation": sc.propagation,
                    "temperature": sc.temperature if sc.propagation == "ising" else None,
                    "effect": sc.effect,
                    "lambda": lam,
                    "test": test,
                    "replicates": cell.valid.get(test, 0),
                    "excluded": cell.total - cell.valid.get(test, 0),
                    "power": cell.power(test),
                    "mc_se": cell.mc_se(test),
                    "mean_n_d1": means[0],
                    "mean_n_d01": means[1],
                    "mean_n_d00": means[2],
                    "mean_degcor": degcor,
                }

    def lookup(self, test: str, **coords) -> dict:
        hits = [r for r in self.rows() if r["test"] == test and all(r[k] == v for k, v in coords.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {test} {coords}")
        return hits[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed}\n")
        buf.write(POWER_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for r in self.rows():
            w.writerow([_fmt(r[c]) for c in POWER_HEADER.split(",")])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(round(x, 10))
    return str(x)


def run_grid(g: Graph, grid: ScenarioGrid, workers: int = 1) -> PowerTable:
    """Run every cell of ``grid``; output is identical for any ``workers``."""
    scenarios = grid.scenarios()
    units = []
    for ci, sc in enumerate(scenarios):
        for start in range(0, grid.replicates, CHUNK):
            rows = np.arange(start, min(start + CHUNK, grid.replicates))
            units.append((ci, (sc, grid.tests, rows, grid.permutations, grid.seed)))
    ctx = _Context(g, grid.seed, grid.joint_method)
    if {"ht_wald", "hajek_wald"} & set(grid.tests):
        for sc in scenarios:  # once, before any fork
            ctx.kernel(sc.make_design(g.n))
    results = _execute(_run_unit, [u for _, u in units], ctx, workers)
    cells = [CellResult(sc, tuple(grid.tests)) for sc in scenarios]
    for (ci, _), res in zip(units, results):
        cells[ci].merge(res)
    return PowerTable(grid.seed, cells)


# -- degree/treatment correlation study -------------------------------------


@dataclass
class DegcorTable:
    seed: int
    gammas: np.ndarray = field(repr=False)
    correlations: np.ndarray = field(repr=False)
    rejections: np.ndarray = field(repr=False)

    def bins(self, by_gamma: bool = True) -> list[dict]:
        """Equal-width bins of realized correlation, per gamma or pooled."""
        ok = np.isfinite(self.correlations)
        idx = np.floor(self.correlations[ok] / DEGCOR_BIN + 1e-9).astype(np.int64)
        gam = self.gammas[ok] if by_gamma else np.zeros(int(ok.sum()))
        rej = self.rejections[ok]
        cor = self.correlations[ok]
        out = []
        for gv in np.unique(gam):
            for b in np.unique(idx[gam == gv]):
                sel = (gam == gv) & (idx == b)
                n = int(sel.sum())
                k = int(rej[sel].sum())
                p = k / n
                out.append({
                    "gamma": float(gv) if by_gamma else None,
                    "bin_lo": round(b * DEGCOR_BIN, 10),
                    "bin_hi": round((b + 1) * DEGCOR_BIN, 10),
                    "bin_mid": round((b + 0.5) * DEGCOR_BIN, 10),
                    "replicates": n,
                    "rejections": k,
                    "power": p,
                    "mc_se": math.sqrt(p * (1 - p) / n),
                    "mean_degcor": float(cor[sel].mean()),
                })
        return out

    def slope(self) -> tuple[float, float]:
        return power_slope(self.bins(by_gamma=False))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed}\n")
        buf.write(DEGCOR_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for r in self.bins():
            w.writerow([_fmt(r[c]) for c in DEGCOR_HEADER.split(",")])
        return buf.getvalue()


def power_slope(bins: list[dict]) -> tuple[float, float]:
    """Slope of power on bin midpoint, weighted by bin size, with a robust SE.

    Equivalent to least squares of the 0/1 rejection indicators on their
    bin midpoints, with a heteroskedasticity-consistent (HC0) standard error.
    """
    x = np.array([b["bin_mid"] for b in bins], dtype=np.float64)
    p = np.array([b["power"] for b in bins], dtype=np.float64)
    w = np.array([b["replicates"] for b in bins], dtype=np.float64)
    if x.size < 2:
        raise DegenerateError("need at least two correlation bins for a slope")
    xm = np.dot(w, x) / w.sum()
    pm = np.dot(w, p) / w.sum()
    xc = x - xm
    sxx = np.dot(w, xc * xc)
    if sxx <= 0:
        raise DegenerateError("all correlations fall in one bin")
    b = np.dot(w, xc * (p - pm)) / sxx
    fit = pm + b * xc
    # within-bin residual sum of squares of the indicators around the fitted line
    rss = w * (p * (1 - p) + (p - fit) ** 2)
    se = math.sqrt(np.dot(xc * xc, rss)) / sxx
    return float(b), float(se)


def degree_correlation_study(
    g: Graph,
    base: Scenario,
    gammas,
    replicates: int,
    seed=0,
    workers: int = 1,
    joint_method: str = "mc",
) -> DegcorTable:
    """ht_wald rejections against realized degree/treatment correlation, over a sweep of tilts.

    Every gamma uses the same replicate streams, so the sweep isolates the tilt.
    """
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    gammas = [float(x) for x in gammas]
    if not gammas:
        raise ConfigError("at least one gamma is required")
    ctx = _Context(g, seed, joint_method)
    units = []
    for gv in gammas:
        sc = replace(base, design="degree-tilted", gamma=gv)
        ctx.kernel(sc.make_design(g.n))
        for start in range(0, replicates, CHUNK):
            units.append((sc, np.arange(start, min(start + CHUNK, replicates)), seed))
    parts = _execute(_degcor_unit, units, ctx, workers)
    gam = np.concatenate([p[0] for p in parts])
    cor = np.concatenate([p[1] for p in parts])
    rej = np.concatenate([p[2] for p in parts])
    ok = np.concatenate([p[3] for p in parts])
    return DegcorTable(int(as_key(seed).master), gam[ok], cor[ok], rej[ok])


def _degcor_unit(args):
    sc, rows, seed = args
    ctx = _WORKER["ctx"]
    g = ctx.g
    batch = simulate(g, sc, seed, rows)
    ok, rej = _wald_rejections(ctx.kernel(sc.make_design(g.n)), batch, "ht")
    cor = degree_correlations(batch.z, g)
    return np.full(rows.shape[0], sc.gamma), cor, rej, ok


# -- per-replicate records -------------------------------------------------------

ESTIMATE_HEADER = "replicate,estimator,tau_hat,var_hat,z,p,n_d1,n_d01,n_d00"
RITEST_HEADER = "replicate,null_kind,stat,p,n_groups,group_sizes"


def replicate_details(
    g: Graph,
    scenario: Scenario,
    replicates: int,
    permutations: int = 500,
    seed=0,
    tests=TESTS,
    joint_method: str = "mc",
) -> tuple[list, list]:
    """Per-replicate estimates and randomization-test results for one scenario.

    Uses the same streams as :func:`run_cell`, so these rows are the
    replicates behind that cell's power. Replicates where a statistic is
    undefined are omitted from the corresponding list.
    """
    ctx = _Context(g, seed, joint_method)
    design = scenario.make_design(g.n)
    key = as_key(seed)
    est_rows, ri_rows = [], []
    for start in range(0, replicates, CHUNK):
        batch = simulate(g, scenario, key, np.arange(start, min(start + CHUNK, replicates)))
        for i, r in enumerate(batch.rows.tolist()):
            y, c = batch.y[i], batch.conditions[i]
            counts = [int((c == k).sum()) for k in (D1, D01, D00)]
            for test in tests:
                if test in ("ht_wald", "hajek_wald"):
                    if counts[1] == 0 or counts[2] == 0:
                        continue
                    est = test.split("_")[0]
                    kern = ctx.kernel(design)
                    if est == "ht":
                        tau, var = float(ht_tau(y, c, kern.pi)), float(kern.ht_variance(y, c)[0])
                    else:
                        tau, var = float(hajek_tau(y, c, kern.pi)), float(kern.hajek_variance(y, c)[0])
                    z = tau / math.sqrt(var)
                    p = float(wald_p_values(tau, var))
                    est_rows.append([r, est, tau, var, z, p, *counts])
                else:
                    kind = ALL_THREE if test == "ri_all3" else CONTROLS_ONLY
                    try:
                        res = permutation_test(g, design, y, batch.z[i], NullSpec(kind), permutations, key.child("perm", r))
                    except DegenerateError:
                        continue
                    sizes = ";".join(str(s) for s in res.group_sizes)
                    ri_rows.append([r, kind, res.observed_stat, res.p_value, len(res.group_sizes), sizes])
    return est_rows, ri_rows


def rows_to_csv(header: str, rows, seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()
