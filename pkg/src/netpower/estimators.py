"""Design-based estimation of exposure contrasts.

Horvitz-Thompson and Hajek estimators of the mean potential outcome in an
exposure condition, a conservative variance estimator built from pairwise
exposure probabilities, and the normal-approximation test of ``tau = 0``.

Most functions accept a single outcome vector of length ``n`` or a stack of
replicates of shape ``(rows, n)`` with matching ``conditions``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .design import JointExposure
from .errors import DegenerateError, PositivityError
from .exposure import D00, D01, ExposureCondition

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ExposureContrast:
    high: ExposureCondition = D01
    low: ExposureCondition = D00

    def __post_init__(self):
        if self.high == self.low:
            raise ValueError("contrast needs two different exposure conditions")


DEFAULT_CONTRAST = ExposureContrast()


@dataclass(frozen=True)
class EstimateReport:
    tau_hat: float
    variance_hat: float
    z_score: float
    p_value: float
    n_high: int
    n_low: int
    level: float = 0.05

    @property
    def reject(self) -> bool:
        return self.p_value < self.level


def _indicator(conditions, k, pi):
    ind = np.asarray(conditions) == k
    pik = pi[:, k]
    if np.any(ind & (pik <= 0.0)):
        raise PositivityError(f"node realized in {ExposureCondition(k).label} has zero probability")
    return ind, pik


def _safe_ratio(y, pik, ind):
    return np.where(ind, y / np.where(ind, pik, 1.0), 0.0)


def ht_mean(y, conditions, pi, k):
    """``(1/n) sum_i I(D_i = k) y_i / pi_i(k)``; an empty condition gives 0."""
    y = np.asarray(y, dtype=np.float64)
    ind, pik = _indicator(conditions, k, pi)
    n = y.shape[-1]
    return _safe_ratio(y, pik, ind).sum(axis=-1) / n


def ht_tau(y, conditions, pi, contrast: ExposureContrast = DEFAULT_CONTRAST):
    return ht_mean(y, conditions, pi, contrast.high) - ht_mean(y, conditions, pi, contrast.low)


def hajek_mean(y, conditions, pi, k):
    """Self-normalized mean: ``sum I y/pi / sum I/pi``."""
    y = np.asarray(y, dtype=np.float64)
    ind, pik = _indicator(conditions, k, pi)
    if np.any(ind.sum(axis=-1) == 0):
        raise DegenerateError(f"no node in condition {ExposureCondition(k).label}")
    w = _safe_ratio(np.ones_like(y), pik, ind)
    return (w * y).sum(axis=-1) / w.sum(axis=-1)


def hajek_tau(y, conditions, pi, contrast: ExposureContrast = DEFAULT_CONTRAST):
    return hajek_mean(y, conditions, pi, contrast.high) - hajek_mean(y, conditions, pi, contrast.low)


class VarianceKernel:
    """Pairwise weights of the conservative variance estimator for one contrast.

    Pairs with positive joint probability enter through
    ``(pi_ij - pi_i pi_j) / pi_ij``; pairs that can never co-occur are
    replaced by the Young's-inequality bound ``y_i^2/(2 pi_i) + y_j^2/(2 pi_j)``.
    """

    def __init__(self, joint: JointExposure, contrast: ExposureContrast = DEFAULT_CONTRAST):
        self.contrast = contrast
        self.pi = joint.pi
        n = self.pi.shape[0]
        h, lo = contrast.high, contrast.low
        off = ~np.eye(n, dtype=bool)
        self.weights = {}
        self.zero_counts = {}
        for k in (h, lo):
            pj, zero = joint.pair(k, k)
            pik = self.pi[:, k]
            self.weights[k] = self._weights(pj, zero | ~off, pik, pik)
            self.zero_counts[k] = (self._bounded(zero, pik, pik) & off).sum(axis=1).astype(np.float64)
        pj, zero = joint.pair(h, lo)
        self.cross = self._weights(pj, zero | ~off, self.pi[:, h], self.pi[:, lo])
        zero = self._bounded(zero, self.pi[:, h], self.pi[:, lo])
        self.cross_rows = zero.sum(axis=1).astype(np.float64)
        self.cross_cols = zero.sum(axis=0).astype(np.float64)

    @staticmethod
    def _bounded(zero, pa, pb):
        # a node that can never be in the condition contributes nothing, so
        # only pairs of individually possible events need the bound
        return zero & (pa > 0)[:, None] & (pb > 0)[None, :]

    @staticmethod
    def _weights(pj, skip, pa, pb):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = (pj - pa[:, None] * pb[None, :]) / pj
        w[skip] = 0.0
        return w

    def _parts(self, y, conditions):
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        conditions = np.atleast_2d(conditions)
        out = {}
        for k in (self.contrast.high, self.contrast.low):
            ind, pik = _indicator(conditions, k, self.pi)
            u = _safe_ratio(y, pik, ind)
            sq = _safe_ratio(y * y, pik, ind)  # I y^2 / pi
            out[k] = (u, sq, pik)
        return out

    def total_variance(self, y, conditions):
        """Unscaled ``Var(high total) + Var(low total) - 2 Cov`` per row."""
        parts = self._parts(y, conditions)
        h, lo = self.contrast.high, self.contrast.low
        var = {}
        for k in (h, lo):
            u, sq, pik = parts[k]
            v = ((1.0 - pik) * u * u).sum(axis=1)
            v += np.einsum("ri,ri->r", u @ self.weights[k], u)
            v += (sq * self.zero_counts[k]).sum(axis=1)
            var[k] = v
        uh, sqh, _ = parts[h]
        ul, sql, _ = parts[lo]
        cov = np.einsum("ri,ri->r", uh @ self.cross, ul)
        cov -= 0.5 * (sqh * self.cross_rows).sum(axis=1) + 0.5 * (sql * self.cross_cols).sum(axis=1)
        return var[h] + var[lo] - 2.0 * cov

    def ht_variance(self, y, conditions):
        y = np.atleast_2d(y)
        n = y.shape[-1]
        return np.maximum(self.total_variance(y, conditions) / n**2, VARIANCE_FLOOR)

    def hajek_variance(self, y, conditions):
        """Linearized variance: the same estimator applied to within-condition residuals.

        Residuals in condition ``k`` are scaled by ``n / N_k``, where ``N_k`` is
        the estimated number of nodes in ``k`` (``sum I/pi``), so the result is
        ``Var(sum I e/pi) / N_k^2`` rather than ``/ n^2``.
        """
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        conditions = np.atleast_2d(conditions)
        n = y.shape[-1]
        resid = y.copy()
        for k in (self.contrast.high, self.contrast.low):
            ind, pik = _indicator(conditions, k, self.pi)
            size = _safe_ratio(np.ones_like(y), pik, ind).sum(axis=1)
            mu = hajek_mean(y, conditions, self.pi, k)
            resid = np.where(ind, (y - mu[:, None]) * (n / size)[:, None], resid)
        return np.maximum(self.total_variance(resid, conditions) / n**2, VARIANCE_FLOOR)


def _squeeze(x, like):
    return float(x[0]) if np.ndim(like) == 1 else x


def ht_variance(y, conditions, pi, pi_joint: JointExposure | None, contrast: ExposureContrast = DEFAULT_CONTRAST):
    """Conservative variance of the HT contrast, floored at ``1e-12``.

    ``pi`` must agree with ``pi_joint.pi``; it is accepted for symmetry with
    the point estimators.
    """
    if pi_joint is None:
        raise ValueError("variance estimation needs joint exposure probabilities")
    if not np.allclose(pi_joint.pi[:, [contrast.high, contrast.low]], np.asarray(pi)[:, [contrast.high, contrast.low]]):
        raise ValueError("marginal probabilities disagree with the joint-probability object")
    return _squeeze(VarianceKernel(pi_joint, contrast).ht_variance(y, conditions), y)


def hajek_variance(y, conditions, pi, pi_joint: JointExposure | None, contrast: ExposureContrast = DEFAULT_CONTRAST):
    if pi_joint is None:
        raise ValueError("variance estimation needs joint exposure probabilities")
    return _squeeze(VarianceKernel(pi_joint, contrast).hajek_variance(y, conditions), y)


def wald_test(tau_hat: float, variance_hat: float, level: float = 0.05, n_high: int = -1, n_low: int = -1) -> EstimateReport:
    """Two-sided normal-approximation test of ``tau = 0``."""
    if not variance_hat > 0:
        raise DegenerateError(f"variance estimate must be positive, got {variance_hat}")
    z = tau_hat / np.sqrt(variance_hat)
    p = float(2.0 * norm.sf(abs(z)))
    return EstimateReport(float(tau_hat), float(variance_hat), float(z), p, int(n_high), int(n_low), level)


def wald_p_values(tau_hat, variance_hat):
    """Vectorized two-sided p-values."""
    z = np.asarray(tau_hat) / np.sqrt(np.asarray(variance_hat))
    return 2.0 * norm.sf(np.abs(z))


def ht_wald(y, conditions, joint: JointExposure, contrast=DEFAULT_CONTRAST, level=0.05) -> EstimateReport:
    kern = VarianceKernel(joint, contrast)
    tau = float(ht_tau(y, conditions, joint.pi, contrast))
    var = float(kern.ht_variance(y, conditions)[0])
    c = np.asarray(conditions)
    return wald_test(tau, var, level, int((c == contrast.high).sum()), int((c == contrast.low).sum()))


def hajek_wald(y, conditions, joint: JointExposure, contrast=DEFAULT_CONTRAST, level=0.05) -> EstimateReport:
    kern = VarianceKernel(joint, contrast)
    tau = float(hajek_tau(y, conditions, joint.pi, contrast))
    var = float(kern.hajek_variance(y, conditions)[0])
    c = np.asarray(conditions)
    return wald_test(tau, var, level, int((c == contrast.high).sum()), int((c == contrast.low).sum()))
