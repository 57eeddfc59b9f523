"""Scenario schema: the JSON wire format shared by the service and the CLI.

A scenario bundles the task catalog, the worker population, optionally a
posted mechanism, optional solver overrides, and optionally a candidate
allocation to check. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import replace

from pydantic import BaseModel, ConfigDict, Field

from .model import (
    InvalidScenarioError,
    LogUtility,
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
)
from .ne import NeAllocation

__all__ = [
    "TaskSpec",
    "PopulationSpec",
    "MechanismSpec",
    "AllocationSpec",
    "SolverOverrides",
    "Scenario",
    "load_scenario",
    "scenario_parts",
]


class TaskSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    u: float = Field(description="revenue coefficient")
    c: float = Field(description="completion cost")


class PopulationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: float
    n_high: float = 0.0
    q_high: float = 2.0
    q_low: float = 1.0


class MechanismSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rewards: list[float]
    quality_reqs: list[float]


class AllocationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_high: list[float]
    n_low: list[float]
    lambda_high: float = 0.0
    lambda_low: float = 0.0


class SolverOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bisection_tol: float | None = None
    mass_tol: float | None = None
    tie_tol: float | None = None
    che_eps: float | None = None
    che_level_cap: int | None = None
    grasp_alpha: float | None = None
    grasp_max_iter: int | None = None
    rng_seed: int | None = None


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tasks: list[TaskSpec]
    population: PopulationSpec
    mechanism: MechanismSpec | None = None
    solver: SolverOverrides | None = None
    allocation: AllocationSpec | None = None

    def catalog(self) -> TaskCatalog:
        return TaskCatalog(
            tuple(t.u for t in self.tasks), tuple(t.c for t in self.tasks)
        )

    def pop(self) -> Population:
        p = self.population
        return Population(p.n, p.n_high, p.q_high, p.q_low)

    def mech(self) -> Mechanism:
        if self.mechanism is None:
            raise InvalidScenarioError("this operation needs a posted mechanism")
        return Mechanism(tuple(self.mechanism.rewards), tuple(self.mechanism.quality_reqs))

    def alloc(self) -> NeAllocation:
        if self.allocation is None:
            raise InvalidScenarioError("this operation needs a candidate allocation")
        a = self.allocation
        return NeAllocation(
            tuple(a.n_high), tuple(a.n_low), a.lambda_high, a.lambda_low
        )

    def solver_config(self, seed: int | None = None) -> SolverConfig:
        cfg = SolverConfig()
        if self.solver is not None:
            overrides = {
                k: v for k, v in self.solver.model_dump().items() if v is not None
            }
            cfg = replace(cfg, **overrides)
        if seed is not None:
            cfg = replace(cfg, rng_seed=seed)
        return cfg

    def utility(self) -> LogUtility:
        return LogUtility.from_catalog(self.catalog())


def load_scenario(source: str | dict) -> Scenario:
    """Parse a scenario from a JSON file path or an already-decoded dict."""
    if isinstance(source, dict):
        return Scenario.model_validate(source)
    with open(source) as fh:
        return Scenario.model_validate(json.load(fh))


def scenario_parts(scn: Scenario, seed: int | None = None):
    """Convenience unpack: (catalog, population, solver config)."""
    return scn.catalog(), scn.pop(), scn.solver_config(seed)
