"""Time the numba and numpy versions of each hot kernel on desk-sized inputs.

    python3 benchmarks/bench_kernels.py [--rows 500] [--repeat 7]

Both implementations are called directly, so the NETPOWER_DISABLE_NUMBA
switch does not matter here. Each line reports the best of ``--repeat``
runs after one warm-up call (which also triggers numba compilation).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from netpower import kernels
from netpower._accel import NUMBA_AVAILABLE
from netpower.design import Bernoulli, draw_assignments
from netpower.exposure import classify_batch
from netpower.graph import GraphProfile, generate
from netpower.ritest import _tie_bounds
from netpower.rng import as_key


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=500, help="assignments per batch")
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    g = generate(GraphProfile(868, 0.022), args.seed)
    key = as_key(args.seed)
    z = draw_assignments(Bernoulli(0.05), g, key.child("z"), np.arange(args.rows))
    rk = kernels.row_keys(key.key, np.arange(args.rows))

    y = np.random.default_rng(args.seed).random(g.n)
    order = np.argsort(y, kind="stable")
    bounds = _tie_bounds(y[order])
    lab = np.ascontiguousarray(classify_batch(g, z)[:, order])
    y_tied = np.round(y, 1)  # heavy ties exercise the general path
    order_t = np.argsort(y_tied, kind="stable")
    bounds_t = _tie_bounds(y_tied[order_t])
    lab_t = np.ascontiguousarray(classify_batch(g, z)[:, order_t])

    cases = {
        "uniforms": (lambda: kernels.splitmix_uniforms_np(rk, g.n), lambda: kernels.splitmix_uniforms_nb(rk, g.n)),
        "neighbor_counts": (
            lambda: kernels.neighbor_counts_np(g.indptr, g.indices, z),
            lambda: kernels.neighbor_counts_nb(g.indptr, g.indices, z),
        ),
        "ad_stat (no ties)": (
            lambda: kernels.ad_batch_np(bounds, lab, 3, True),
            lambda: kernels.ad_batch_nb(bounds, lab, 3, True),
        ),
        "ad_stat (ties)": (
            lambda: kernels.ad_batch_np(bounds_t, lab_t, 3, True),
            lambda: kernels.ad_batch_nb(bounds_t, lab_t, 3, True),
        ),
    }
    print(f"graph n={g.n} edges={g.n_edges}; {args.rows} rows per call; numba available: {NUMBA_AVAILABLE}")
    print(f"{'kernel':<20}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, (f_np, f_nb) in cases.items():
        a = np.asarray(f_np())
        b = np.asarray(f_nb())
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name}: numba and numpy disagree")
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
