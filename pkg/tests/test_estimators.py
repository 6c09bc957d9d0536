import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from netpower.design import Bernoulli, JointExposure, exposure_probs_closed_form, joint_exposure_probs
from netpower.errors import DegenerateError, PositivityError
from netpower.estimators import (
    ExposureContrast,
    VarianceKernel,
    hajek_mean,
    hajek_tau,
    hajek_variance,
    hajek_wald,
    ht_mean,
    ht_tau,
    ht_variance,
    ht_wald,
    wald_p_values,
    wald_test,
)
from netpower.exposure import D00, D01, D1, classify
from netpower.graph import erdos_renyi, path_graph


def path_setup():
    g = path_graph(3)
    pi = exposure_probs_closed_form(Bernoulli(0.5), g)
    cond = classify(g, [1, 0, 0])
    y = np.array([0.9, 0.4, 0.7])
    return g, pi, cond, y


def test_path_ht_examples():
    _, pi, cond, y = path_setup()
    assert ht_mean(y, cond, pi, D01) == pytest.approx(0.4 / 0.375 / 3, abs=1e-12)
    assert ht_mean(y, cond, pi, D01) == pytest.approx(0.35556, abs=5e-6)
    assert pi[2, D00] == 0.25
    assert ht_mean(y, cond, pi, D00) == pytest.approx(0.93333, abs=5e-6)
    assert ht_tau(y, cond, pi) == pytest.approx(-0.57777, abs=1e-5)


def test_empty_condition_and_degenerate_cases():
    _, pi, cond, y = path_setup()
    # no node lands in d1 when nothing is treated
    none = classify(path_graph(3), [0, 0, 0])
    assert ht_mean(y, none, pi, D1) == 0.0
    with pytest.raises(DegenerateError):
        hajek_mean(y, none, pi, D1)
    ones = np.zeros((3, 3))
    ones[:, D00] = 1.0
    assert ht_mean(y, none, ones, D00) == pytest.approx(y.mean())


def test_positivity_violation_aborts():
    _, pi, cond, y = path_setup()
    bad = pi.copy()
    bad[1, D01] = 0.0
    with pytest.raises(PositivityError):
        ht_mean(y, cond, bad, D01)


def test_hajek_single_node_and_constant_outcomes():
    _, pi, cond, y = path_setup()
    assert hajek_mean(y, cond, pi, D01) == 0.4
    rng = np.random.default_rng(0)
    g = erdos_renyi(40, 0.1, 1)
    pi = exposure_probs_closed_form(Bernoulli(0.2), g)
    z = (rng.random(40) < 0.2).astype(int)
    c = classify(g, z)
    assert hajek_mean(np.full(40, 0.37), c, pi, D00) == pytest.approx(0.37, abs=1e-15)
    flat = np.full_like(pi, 0.5)
    yy = rng.random(40)
    assert hajek_mean(yy, c, flat, D00) == pytest.approx(yy[c == D00].mean())


def test_symmetric_conditions_give_zero_contrast():
    cond = np.array([D01, D00, D01, D00])
    pi = np.tile([0.2, 0.4, 0.4], (4, 1))
    assert ht_tau(np.full(4, 0.6), cond, pi) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.05, 20.0))
def test_hajek_is_scale_invariant_ht_is_not(seed, c):
    rng = np.random.default_rng(seed)
    g = erdos_renyi(30, 0.1, seed % 97)
    pi = exposure_probs_closed_form(Bernoulli(0.2), g)
    z = (rng.random(30) < 0.2).astype(int)
    cond = classify(g, z)
    if not (np.any(cond == D00) and np.any(cond == D01)):
        return
    y = rng.random(30) + 0.1
    scaled = pi.copy()
    scaled[:, D00] *= c
    assert hajek_mean(y, cond, scaled, D00) == pytest.approx(hajek_mean(y, cond, pi, D00), rel=1e-12)
    if abs(c - 1.0) > 1e-6:
        assert ht_mean(y, cond, scaled, D00) != pytest.approx(ht_mean(y, cond, pi, D00), rel=1e-9)


def enumeration(g, alpha):
    design = oracles.enumerate_design(g.n, g.edges.tolist(), [alpha] * g.n)
    w = np.array([d[0] for d in design])
    conds = np.array([d[2] for d in design])
    return w, conds


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_ht_identity_by_enumeration(seed):
    g = erdos_renyi(10, 0.25, seed)
    pi = oracles.exposure_probs(g.n, g.edges.tolist(), [0.3] * g.n)
    w, conds = enumeration(g, 0.3)
    y = np.random.default_rng(seed).random(g.n)
    for k in (D1, D01, D00):
        est = np.array([ht_mean(y, c, pi, k) for c in conds])
        # every node with a positive probability contributes y_i / n on average
        target = y[pi[:, k] > 0].sum() / g.n
        assert abs(w @ est - target) <= 1e-10
    taus = np.array([ht_tau(y, c, pi) for c in conds])
    assert abs(w @ taus - (y[pi[:, D01] > 0].sum() - y[pi[:, D00] > 0].sum()) / g.n) <= 1e-10


@pytest.mark.parametrize("seed", [1, 2, 3, 4])
def test_variance_is_conservative_by_enumeration(seed):
    g = erdos_renyi(10, 0.25, seed)
    joint = joint_exposure_probs(Bernoulli(0.3), g, conditions=(D01, D00), method="closed")
    w, conds = enumeration(g, 0.3)
    y = np.random.default_rng(seed).random(g.n) + 0.5
    ys = np.tile(y, (len(w), 1))
    taus = ht_tau(ys, conds, joint.pi)
    true_var = w @ (taus - w @ taus) ** 2
    kern = VarianceKernel(joint)
    est = kern.ht_variance(ys, conds)
    assert w @ est >= true_var - 1e-12


def test_variance_of_two_nodes_that_never_meet():
    # node 0 only ever in the high condition, node 1 only in the low one
    pi = np.array([[0.0, 0.0, 0.4], [0.0, 0.7, 0.0]])
    jz = np.zeros((2, 2))
    joint = {
        (D01, D01): np.diag([0.4, 0.0]),
        (D00, D00): np.diag([0.0, 0.7]),
        (D01, D00): jz,
    }
    zero = {key: v == 0 for key, v in joint.items()}
    j = JointExposure(pi, joint, zero, "closed")
    y = np.array([0.8, 0.3])
    cond = np.array([D01, D00])
    unit = (0.6 * (0.8 / 0.4) ** 2 + 0.8**2 / 0.4) + (0.3 * (0.3 / 0.7) ** 2 + 0.3**2 / 0.7)
    assert ht_variance(y, cond, pi, j) == pytest.approx(unit / 4, rel=1e-12)


def test_deterministic_conditions_have_zero_variance():
    n = 4
    pi = np.zeros((n, 3))
    pi[:2, D01] = 1.0
    pi[2:, D00] = 1.0
    joint = {}
    for k, l in ((D01, D01), (D00, D00), (D01, D00)):
        joint[(k, l)] = np.outer(pi[:, k], pi[:, l])
    zero = {key: v == 0 for key, v in joint.items()}
    j = JointExposure(pi, joint, zero, "closed")
    cond = np.array([D01, D01, D00, D00])
    y = np.array([0.2, 0.5, 0.9, 0.1])
    assert VarianceKernel(j).total_variance(y, cond)[0] == pytest.approx(0.0, abs=1e-15)
    assert ht_variance(y, cond, pi, j) == 1e-12


def test_variance_needs_joint_probabilities():
    _, pi, cond, y = path_setup()
    with pytest.raises(ValueError):
        ht_variance(y, cond, pi, None)


def test_batch_and_single_row_agree():
    g = erdos_renyi(30, 0.12, 5)
    joint = joint_exposure_probs(Bernoulli(0.2), g, method="closed")
    rng = np.random.default_rng(1)
    z = (rng.random((6, 30)) < 0.2).astype(int)
    conds = np.array([classify(g, r) for r in z])
    ys = rng.random((6, 30))
    kern = VarianceKernel(joint)
    hv = kern.ht_variance(ys, conds)
    for r in range(6):
        assert hv[r] == pytest.approx(ht_variance(ys[r], conds[r], joint.pi, joint), rel=1e-12)
        rep = ht_wald(ys[r], conds[r], joint)
        assert rep.n_high == (conds[r] == D01).sum()
    ok = [r for r in range(6) if np.any(conds[r] == D01) and np.any(conds[r] == D00)]
    hj = kern.hajek_variance(ys[ok], conds[ok])
    for i, r in enumerate(ok):
        assert hj[i] == pytest.approx(hajek_variance(ys[r], conds[r], joint.pi, joint), rel=1e-12)
        assert hajek_wald(ys[r], conds[r], joint).tau_hat == pytest.approx(hajek_tau(ys[r], conds[r], joint.pi))


def test_hajek_variance_of_constant_outcomes_is_floored():
    g = erdos_renyi(30, 0.12, 5)
    joint = joint_exposure_probs(Bernoulli(0.2), g, method="closed")
    c = classify(g, (np.arange(30) % 6 == 0).astype(int))
    assert hajek_variance(np.full(30, 0.4), c, joint.pi, joint) == 1e-12


def test_wald_examples():
    assert wald_test(0.0, 1.0).p_value == 1.0
    assert not wald_test(0.0, 1.0).reject
    rep = wald_test(1.959964, 1.0)
    assert rep.p_value == pytest.approx(0.05, abs=1e-6)
    assert wald_test(-1.959964, 1.0).p_value == pytest.approx(rep.p_value)
    assert wald_test(50.0, 1e-4).reject
    with pytest.raises(DegenerateError):
        wald_test(1.0, 0.0)
    assert np.allclose(wald_p_values([0.0, 1.959964], [1.0, 1.0]), [1.0, 0.05], atol=1e-6)


def test_contrast_validation():
    with pytest.raises(ValueError):
        ExposureContrast(D00, D00)
