"""Power analysis for randomized experiments on networks.

Treatment is assigned at t=0, spreads to neighbours under an Ising-type or
perfect propagation model, and outcomes respond to exposure. The package
computes exposure-condition probabilities, design-based estimators and
randomization tests, and tabulates their power over scenario grids.
"""

from ._accel import backend
from .design import (
    Bernoulli,
    CompleteCount,
    DegreeTilted,
    JointExposure,
    draw_assignment,
    exposure_probs_closed_form,
    exposure_probs_monte_carlo,
    inclusion_probabilities,
    joint_exposure_probs,
    realized_degree_correlation,
)
from .estimators import ExposureContrast, hajek_mean, hajek_tau, hajek_variance, ht_mean, ht_tau, ht_variance, wald_test
from .exposure import D00, D01, D1, ExposureCondition, classify, condition_counts
from .graph import Graph, GraphProfile, generate, load_edge_list, write_edge_list
from .harness import Scenario, ScenarioGrid, degree_correlation_study, run_cell, run_grid
from .outcomes import Additive, Multiplicative, draw_baseline, realize
from .propagation import InfectionState, Ising, Perfect, infection_probability, run, step
from .ritest import NullSpec, ad_ksample, adjust_outcomes, permutation_test
from .rng import StreamKey, derive

__version__ = "0.1.0"
