import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from netpower.exposure import (
    D00,
    D01,
    D1,
    ConditionCounts,
    ExposureCondition,
    classify,
    classify_batch,
    condition_counts,
    labels,
)
from netpower.graph import Graph, erdos_renyi, path_graph, star_graph


def test_path_example():
    g = path_graph(3)
    assert labels(classify(g, [1, 0, 0])) == ["d1", "d01", "d00"]
    assert labels(classify(g, [0, 1, 0])) == ["d01", "d1", "d01"]


def test_star_centre_treated():
    c = classify(star_graph(4), [1, 0, 0, 0, 0])
    assert condition_counts(c) == ConditionCounts(d1=1, d01=4, d00=0)


def test_all_untreated_are_isolated_from_treatment():
    c = classify(star_graph(4), np.zeros(5, dtype=int))
    assert np.all(c == D00)


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        classify(path_graph(3), [1, 0])


def test_label_parsing():
    assert ExposureCondition.parse(" D01 ") is D01
    assert D00.label == "d00"
    with pytest.raises(ValueError):
        ExposureCondition.parse("d11")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.floats(0, 0.5), st.integers(0, 9999), st.floats(0, 1))
def test_matches_reference_classification(n, p, seed, alpha):
    g = erdos_renyi(n, p, seed) if n > 1 else Graph.from_edges(1, [])
    z = (np.random.default_rng(seed).random(n) < alpha).astype(int)
    ref = oracles.conditions_of(z.tolist(), oracles.neighbor_lists(n, g.edges.tolist()))
    got = classify(g, z)
    assert got.tolist() == ref
    counts = condition_counts(got)
    assert counts.d1 + counts.d01 + counts.d00 == n
    assert counts.d1 == z.sum()


def test_batch_matches_single_rows():
    g = erdos_renyi(25, 0.2, 1)
    z = (np.random.default_rng(0).random((6, 25)) < 0.2).astype(np.int8)
    batch = classify_batch(g, z)
    for r in range(6):
        assert np.array_equal(batch[r], classify(g, z[r]))
