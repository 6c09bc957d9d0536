import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netpower import kernels
from netpower._accel import NUMBA_AVAILABLE, backend
from netpower.graph import erdos_renyi

needs_numba = pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")


@needs_numba
def test_uniform_kernels_agree_bitwise():
    keys = kernels.row_keys(123456789, np.arange(40))
    assert np.array_equal(kernels.splitmix_uniforms_np(keys, 333), kernels.splitmix_uniforms_nb(keys, 333))


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.floats(0.0, 0.6), st.integers(0, 10_000))
def test_neighbor_count_kernels_agree(n, p, seed):
    g = erdos_renyi(n, p, seed)
    z = (np.random.default_rng(seed).random((7, n)) < 0.3).astype(np.int8)
    assert np.array_equal(
        kernels.neighbor_counts_np(g.indptr, g.indices, z), kernels.neighbor_counts_nb(g.indptr, g.indices, z)
    )


def _bounds(values):
    starts = np.flatnonzero(np.r_[True, values[1:] != values[:-1]])
    return np.r_[starts, values.size].astype(np.int64)


@needs_numba
@settings(max_examples=40, deadline=None)
@given(
    st.integers(4, 60),
    st.integers(2, 4),
    st.sampled_from([None, 3, 10]),
    st.booleans(),
    st.integers(0, 10_000),
)
def test_ad_kernels_agree(n, k, levels, midrank, seed):
    rng = np.random.default_rng(seed)
    y = rng.random(n) if levels is None else rng.integers(0, levels, n).astype(float)
    y.sort()
    labels = rng.integers(-1, k, size=(5, n)).astype(np.int8)
    labels[:, :k] = np.arange(k)  # every group present
    a = kernels.ad_batch_np(_bounds(y), labels, k, midrank)
    b = kernels.ad_batch_nb(_bounds(y), labels, k, midrank)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_backend_switch_via_environment():
    code = "from netpower._accel import backend; print(backend())"
    env = dict(os.environ, NETPOWER_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    assert backend() == ("numba" if NUMBA_AVAILABLE and not os.environ.get("NETPOWER_DISABLE_NUMBA") else "numpy")


def test_results_identical_across_backends(tmp_path):
    code = (
        "import numpy as np\n"
        "from netpower.graph import GraphProfile, generate\n"
        "from netpower.harness import Scenario, run_cell\n"
        "g = generate(GraphProfile(120, 0.06), 3)\n"
        "r = run_cell(g, Scenario(alpha=0.1, temperature=20.0), replicates=10, permutations=99, seed=4)\n"
        "print(sorted(r.rejections.items()), sorted(r.valid.items()), r.sum_counts.tolist())\n"
    )
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, NETPOWER_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs.append(res.stdout)
    assert outs[0] == outs[1]
