"""Multi-commodity spot market for substitutable CPU resources."""

from .domain import CategorySpec, Contract, Job, PriceVector, duration_on_category, euclidean_norm
from .engine import ScenarioConfig, StepMetrics, World, run_simulation, summarize
from .market import ExcessDemandField, MarketSnapshot, clear_trades, evaluate_xi
from .solver import (CountingField, SolverConfig, SolverResult, esgn_solve, fd_jacobian,
                     find_equilibrium, pattern_search)

__version__ = "0.1.0"
