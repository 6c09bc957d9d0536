import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netpower.errors import ConfigError
from netpower.graph import Graph, erdos_renyi, path_graph, star_graph
from netpower.propagation import (
    InfectionState,
    Ising,
    Perfect,
    infection_probability,
    run,
    run_batch,
    step,
)

from conftest import sem_ok


def reference_probability(k, m, temperature):
    mpmath.mp.dps = 40
    return float(1 / (1 + mpmath.exp(mpmath.mpf(2) / temperature * (k - 2 * m))))


def test_spot_values():
    assert infection_probability(2, 1, 10.0) == 0.5
    assert infection_probability(4, 0, 10.0) == pytest.approx(reference_probability(4, 0, 10), abs=1e-15)
    assert infection_probability(4, 0, 10.0) == pytest.approx(0.310026, abs=5e-7)
    assert infection_probability(3, 2, 0.0) == 1.0


def test_zero_temperature_threshold():
    assert infection_probability(3, 1, 0.0) == 0.0
    assert infection_probability(4, 2, 0.0) == 0.5


def test_count_validation():
    with pytest.raises(ValueError):
        infection_probability(2, 3, 1.0)
    with pytest.raises(ValueError):
        infection_probability(2, 1, -1.0)
    with pytest.raises(ConfigError):
        Ising(-1.0)
    with pytest.raises(ConfigError):
        Perfect(steps=0)


def test_large_arguments_do_not_overflow():
    with np.errstate(over="raise"):
        assert infection_probability(2000, 0, 1e-3) == 0.0
        assert infection_probability(2000, 2000, 1e-3) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 60), st.data(), st.floats(1e-3, 1e4))
def test_matches_high_precision_and_is_monotone(k, data, temperature):
    m = data.draw(st.integers(0, k))
    q = infection_probability(k, m, temperature)
    assert q == pytest.approx(reference_probability(k, m, temperature), rel=1e-12, abs=1e-300)
    if 2 * m == k:
        assert q == 0.5
    assert infection_probability(k + 1, m, temperature) <= q
    if m < k:
        assert infection_probability(k, m + 1, temperature) >= q


def test_continuous_in_temperature():
    qs = [infection_probability(5, 1, f) for f in (7.0, 7.0 + 1e-9)]
    assert abs(qs[0] - qs[1]) < 1e-9


# -- dynamics ---------------------------------------------------------------------


def test_perfect_path_step():
    s = run(path_graph(3), [1, 0, 0], Perfect(), 0)
    assert s.exposed.tolist() == [1, 1, 0] and s.t == 1


def test_zero_temperature_star_centre():
    g = star_graph(2)  # centre 0, leaves 1 and 2
    for seed in range(20):
        assert run(g, [0, 1, 1], Ising(0.0), seed).exposed[0] == 1


def test_trivial_assignments():
    g = erdos_renyi(30, 0.2, 1)
    assert run(g, np.zeros(30), Perfect(), 0).exposed.sum() == 0
    assert run(g, np.ones(30), Ising(20.0), 0).exposed.sum() == 30


def trial_rate(g, z, model, node, trials=100_000, seed=3):
    zs = np.tile(np.asarray(z, dtype=np.int8), (trials, 1))
    return run_batch(g, zs, model, seed, np.arange(trials))[:, node].mean()


def test_empirical_rate_with_no_exposed_neighbours():
    rate = trial_rate(star_graph(4), [0, 0, 0, 0, 0], Ising(10.0), 0)
    q = reference_probability(4, 0, 10)
    assert sem_ok(rate, q, math.sqrt(q * (1 - q) / 100_000))


def test_very_high_temperature_gives_fair_coin():
    g = star_graph(6)
    zs = np.array([0, 1, 1, 0, 0, 0, 0])
    for node in (0, 3):
        rate = trial_rate(g, zs, Ising(1e9), node)
        assert sem_ok(rate, 0.5, math.sqrt(0.25 / 100_000))


def test_require_treated_neighbor_blocks_spontaneous_infection():
    rate = trial_rate(star_graph(4), [0, 0, 0, 0, 0], Ising(1e9, require_treated_neighbor=True), 0, trials=2000)
    assert rate == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(0.02, 0.3), st.integers(0, 999), st.integers(1, 3), st.floats(0, 200))
def test_far_nodes_stay_unexposed_when_a_treated_neighbour_is_required(n, p, seed, steps, temperature):
    import scipy.sparse.csgraph as csg

    g = erdos_renyi(n, p, seed)
    z = (np.random.default_rng(seed).random(n) < 0.2).astype(np.int8)
    s = run(g, z, Ising(temperature, steps=steps, require_treated_neighbor=True), seed)
    if z.any():
        dist = csg.shortest_path(g.adjacency, unweighted=True, indices=np.flatnonzero(z)).min(axis=0)
    else:
        dist = np.full(n, np.inf)
    assert not np.any(s.exposed[dist > steps])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.floats(0, 0.3), st.integers(0, 999), st.floats(0, 100))
def test_exposure_is_monotone_in_time(n, p, seed, temperature):
    g = erdos_renyi(n, p, seed) if n > 1 else Graph.from_edges(1, [])
    z = (np.random.default_rng(seed).random(n) < 0.3).astype(np.int8)
    s = InfectionState(z, 0)
    for _ in range(3):
        nxt = step(g, s, Ising(temperature), seed)
        assert np.all(nxt.exposed >= s.exposed) and nxt.t == s.t + 1
        s = nxt


def test_batch_rows_match_single_runs():
    g = erdos_renyi(50, 0.1, 4)
    model = Ising(30.0, steps=2)
    zs = (np.random.default_rng(0).random((5, 50)) < 0.1).astype(np.int8)
    rows = np.array([7, 3, 11, 0, 2])
    batch = run_batch(g, zs, model, 9, rows)
    # a single run is counter row 0, so compare on that row only
    assert np.array_equal(batch[3], run(g, zs[3], model, 9).exposed)


def test_same_seed_same_result():
    g = erdos_renyi(60, 0.1, 2)
    z = np.zeros(60, dtype=np.int8)
    z[:5] = 1
    a = run(g, z, Ising(40.0), 17).exposed
    assert np.array_equal(a, run(g, z, Ising(40.0), 17).exposed)
    assert not np.array_equal(a, run(g, z, Ising(40.0), 18).exposed)
