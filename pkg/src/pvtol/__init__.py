"""Planar VTOL aircraft: dynamic feedback linearization vs. a Sontag-formula inverse optimal controller."""

from .clf import ClfMatrix, build_clf, certify_negative_definite, riccati_residual, sweep_gain_grid
from .control import FblGains, SetPoint, SontagParams
from .experiments import MonteCarloConfig, canonical_scenario, compare_nominal, monte_carlo
from .model import CompensatorState, PlantInput, PlantParams, PlantState
from .sim import SimConfig, SimResult, run

__version__ = "0.1.0"
