"""Mechanism design and equilibrium analysis for reward-sharing crowdsourcing.

The package models a two-stage game: a requester posts per-task rewards and
quality requirements, then a two-class worker population splits over the
tasks, sharing each task's reward equally. Solvers cover the fully rational
continuum equilibrium, the requester's optimal mechanism, and a
bounded-rational cognitive-hierarchy cascade, with brute-force oracles for
cross-checking. An HTTP service and a thin CLI expose everything.
"""

from .che import CheConfig, CheLevelRecord, CheOutcome, che_requester_search, che_run, poisson_pmf
from .experiments import ResultTable, run_experiment
from .mechopt import (
    FixedSetSolution,
    NearOptMechanism,
    exhaustive_set_search,
    grasp_search,
    mechanism_from_masses,
    solve_fixed_set,
)
from .model import (
    GuardViolationError,
    InvalidScenarioError,
    LogUtility,
    Mechanism,
    Population,
    SolverConfig,
    SolverConvergenceError,
    TaskCatalog,
    UtilityModel,
    eligible_tasks,
    requester_profit,
    worker_payoff,
)
from .ne import NeAllocation, NeResidualReport, ne_solve, verify_ne
from .oracles import IntegerProfile, grid_oracle_fixed_set, integer_br_dynamics
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "CheConfig",
    "CheLevelRecord",
    "CheOutcome",
    "FixedSetSolution",
    "GuardViolationError",
    "IntegerProfile",
    "InvalidScenarioError",
    "LogUtility",
    "Mechanism",
    "NeAllocation",
    "NeResidualReport",
    "NearOptMechanism",
    "Population",
    "ResultTable",
    "Scenario",
    "SolverConfig",
    "SolverConvergenceError",
    "TaskCatalog",
    "UtilityModel",
    "che_requester_search",
    "che_run",
    "eligible_tasks",
    "exhaustive_set_search",
    "grasp_search",
    "grid_oracle_fixed_set",
    "integer_br_dynamics",
    "load_scenario",
    "mechanism_from_masses",
    "ne_solve",
    "poisson_pmf",
    "requester_profit",
    "run_experiment",
    "solve_fixed_set",
    "verify_ne",
    "worker_payoff",
]
