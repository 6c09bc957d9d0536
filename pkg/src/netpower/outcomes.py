"""Baseline responses and treatment-effect models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError
from .rng import uniform_rows


@dataclass(frozen=True)
class Multiplicative:
    lam: float

    kind = "multiplicative"
    null_value = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"multiplicative effect needs lambda > 0, got {self.lam}")

    def apply(self, baseline, exposed):
        return np.where(exposed.astype(bool), self.lam * baseline, baseline)


@dataclass(frozen=True)
class Additive:
    lam: float

    kind = "additive"
    null_value = 0.0

    def apply(self, baseline, exposed):
        return np.where(exposed.astype(bool), self.lam + baseline, baseline)


EffectModel = Union[Multiplicative, Additive]


def effect_model(kind: str, lam: float | None = None) -> EffectModel:
    """Build an effect model; ``lam=None`` gives the no-effect point."""
    cls = {"multiplicative": Multiplicative, "additive": Additive}.get(kind)
    if cls is None:
        raise ConfigError(f"unknown effect kind {kind!r}")
    return cls(cls.null_value if lam is None else float(lam))


def is_null(model: EffectModel) -> bool:
    return model.lam == model.null_value


@dataclass(frozen=True, eq=False)
class OutcomeVector:
    y: np.ndarray
    baseline: np.ndarray


def draw_baseline(n: int, seed) -> np.ndarray:
    """I.i.d. U(0, 1) responses in the absence of any experiment."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    return uniform_rows(seed, [0], n)[0]


def draw_baselines(n: int, seed, rows) -> np.ndarray:
    return uniform_rows(seed, rows, n)


def realize(baseline, final_state, model: EffectModel) -> OutcomeVector:
    """Apply the effect to every exposed node, however it became exposed."""
    baseline = np.asarray(baseline, dtype=np.float64)
    exposed = getattr(final_state, "exposed", final_state)
    exposed = np.asarray(exposed)
    if exposed.shape != baseline.shape:
        raise ValueError("baseline and infection state differ in length")
    return OutcomeVector(model.apply(baseline, exposed), baseline)
