"""Inner loops.

Each kernel has a numba implementation (``*_nb``) and a numpy one
(``*_np``). The public name is bound to one of them at import time via
:data:`netpower._accel.USE_NUMBA`; both stay importable so tests and the
benchmark can compare them directly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, njit

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM1 = np.uint64(0xBF58476D1CE4E5B9)
_SM2 = np.uint64(0x94D049BB133111EB)
_FM1 = np.uint64(0xFF51AFD7ED558CCD)
_FM2 = np.uint64(0xC4CEB9FE1A85EC53)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S33 = np.uint64(33)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53


# -- counter-based uniforms -------------------------------------------------


def _fmix64(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> _S33)
    x = x * _FM1
    x = x ^ (x >> _S33)
    x = x * _FM2
    return x ^ (x >> _S33)


def row_keys(key: int, rows: np.ndarray) -> np.ndarray:
    """Per-row SplitMix64 seeds derived from a stream key and row counters."""
    with np.errstate(over="ignore"):
        r = (rows.astype(np.uint64) + np.uint64(1)) * GAMMA
        return _fmix64(np.uint64(key) ^ _fmix64(r))


def splitmix_uniforms_np(keys: np.ndarray, n: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        ctr = (np.arange(1, n + 1, dtype=np.uint64) * GAMMA)[None, :]
        z = keys.astype(np.uint64)[:, None] + ctr
        z = (z ^ (z >> _S30)) * _SM1
        z = (z ^ (z >> _S27)) * _SM2
        z = z ^ (z >> _S31)
    return ((z >> _S11).astype(np.float64) + 0.5) * _TWO_M53


@njit
def splitmix_uniforms_nb(keys, n):
    out = np.empty((keys.shape[0], n))
    for r in range(keys.shape[0]):
        s = keys[r]
        for i in range(n):
            s = s + GAMMA
            z = s
            z = (z ^ (z >> _S30)) * _SM1
            z = (z ^ (z >> _S27)) * _SM2
            z = z ^ (z >> _S31)
            out[r, i] = (np.float64(z >> _S11) + 0.5) * _TWO_M53
    return out


# -- neighbourhood counts ---------------------------------------------------


def neighbor_counts_np(indptr, indices, z):
    """Row-wise count of treated neighbours: ``z @ A`` for a 0/1 matrix ``z``."""
    n = indptr.shape[0] - 1
    adj = sp.csr_matrix((np.ones(indices.shape[0], dtype=np.int32), indices, indptr), shape=(n, n))
    return np.asarray((adj @ z.T.astype(np.int32)).T, dtype=np.int32)


@njit
def neighbor_counts_nb(indptr, indices, z):
    # scatter from treated nodes: cost scales with the number of ones
    rows, n = z.shape
    out = np.zeros((rows, n), dtype=np.int32)
    for r in range(rows):
        for i in range(n):
            if z[r, i] != 0:
                for p in range(indptr[i], indptr[i + 1]):
                    out[r, indices[p]] += 1
    return out


# -- Anderson-Darling k-sample statistic over many groupings ----------------


def ad_batch_np(bounds, labels, k, midrank):
    """Statistic for each row of ``labels`` (sorted order, -1 = not compared).

    ``bounds`` holds the start offsets of runs of tied pooled values plus a
    trailing ``n``.
    """
    labels = np.asarray(labels)
    onehot = np.stack([(labels == g) for g in range(k)], axis=-1).astype(np.float64)
    f = np.add.reduceat(onehot, bounds[:-1], axis=1)  # (P, runs, k)
    ln = f.sum(axis=2)
    ng = f.sum(axis=1)  # (P, k)
    big_n = ln.sum(axis=1)[:, None]  # (P, 1)
    m = np.cumsum(f, axis=1)
    b = np.cumsum(ln, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if midrank:
            ma = m - f / 2.0
            ba = (b - ln / 2.0)[:, :, None]
            den = ba * (big_n[:, :, None] - ba) - big_n[:, :, None] * ln[:, :, None] / 4.0
            num = (big_n[:, :, None] * ma - ng[:, None, :] * ba) ** 2
        else:
            bb = b[:, :, None]
            den = bb * (big_n[:, :, None] - bb)
            num = (big_n[:, :, None] * m - ng[:, None, :] * bb) ** 2
        w = np.where(den > 0, ln[:, :, None] / np.where(den > 0, den, 1.0), 0.0)
        term = w * num
        total = (term.sum(axis=1) / ng).sum(axis=1)
        big_n = big_n[:, 0]
        if midrank:
            return total * (big_n - 1.0) / big_n**2
        return total / big_n


@njit
def ad_batch_nb(bounds, labels, k, midrank):
    rows, n = labels.shape
    runs = bounds.shape[0] - 1
    out = np.empty(rows)
    ng = np.zeros(k)
    m = np.zeros(k)
    f = np.zeros(k)
    acc = np.zeros(k)
    for r in range(rows):
        for g in range(k):
            ng[g] = 0.0
            m[g] = 0.0
            acc[g] = 0.0
        for i in range(n):
            g = labels[r, i]
            if g >= 0:
                ng[g] += 1.0
        big_n = 0.0
        for g in range(k):
            big_n += ng[g]
        b = 0.0
        todo = runs
        if midrank and runs == n:
            # no ties: every run is a single observation
            q = big_n / 4.0
            for i in range(n):
                g0 = labels[r, i]
                if g0 < 0:
                    continue
                ba = b + 0.5
                w = 1.0 / (ba * (big_n - ba) - q)
                for g in range(k):
                    d = big_n * (m[g] + (0.5 if g == g0 else 0.0)) - ng[g] * ba
                    acc[g] += w * d * d
                m[g0] += 1.0
                b += 1.0
            todo = 0
        for j in range(todo):
            for g in range(k):
                f[g] = 0.0
            ln = 0.0
            for i in range(bounds[j], bounds[j + 1]):
                g = labels[r, i]
                if g >= 0:
                    f[g] += 1.0
                    ln += 1.0
            if ln == 0.0:
                continue
            if midrank:
                ba = b + ln / 2.0
                den = ba * (big_n - ba) - big_n * ln / 4.0
                if den > 0.0:
                    w = ln / den
                    for g in range(k):
                        d = big_n * (m[g] + f[g] / 2.0) - ng[g] * ba
                        acc[g] += w * d * d
            else:
                bb = b + ln
                den = bb * (big_n - bb)
                if den > 0.0:
                    w = ln / den
                    for g in range(k):
                        d = big_n * (m[g] + f[g]) - ng[g] * bb
                        acc[g] += w * d * d
            b += ln
            for g in range(k):
                m[g] += f[g]
        total = 0.0
        for g in range(k):
            total += acc[g] / ng[g]
        if midrank:
            out[r] = total * (big_n - 1.0) / (big_n * big_n)
        else:
            out[r] = total / big_n
    return out


if USE_NUMBA:
    splitmix_uniforms = splitmix_uniforms_nb
    neighbor_counts = neighbor_counts_nb
    ad_batch = ad_batch_nb
else:
    splitmix_uniforms = splitmix_uniforms_np
    neighbor_counts = neighbor_counts_np
    ad_batch = ad_batch_np
