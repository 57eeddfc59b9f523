"""Core domain types for the two-stage crowdsourcing game.

A requester posts M tasks, each carrying a reward and a minimum quality
requirement. A population of workers, split into a high- and a low-quality
class, then selects tasks; everyone on the same task shares its reward
equally. These types are immutable value objects, and all operations here
are pure functions, so they can be evaluated concurrently without locking.

Task ids are 1-based throughout the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "InvalidScenarioError",
    "SolverConvergenceError",
    "GuardViolationError",
    "TaskCatalog",
    "Population",
    "Mechanism",
    "UtilityModel",
    "LogUtility",
    "SolverConfig",
    "eligible_tasks",
    "worker_payoff",
    "requester_profit",
]


class InvalidScenarioError(ValueError):
    """The scenario data violates a structural invariant."""


class SolverConvergenceError(RuntimeError):
    """A multiplier search failed to converge; usually a tolerance misconfiguration."""


class GuardViolationError(ValueError):
    """A search-budget guard (problem size limit) was exceeded."""


def _as_floats(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class TaskCatalog:
    """Per-task revenue coefficients and completion costs.

    ``utilities[m-1]`` scales the requester's concave revenue for task m and
    ``costs[m-1]`` is what completing task m costs any worker (costs are
    task dependent but not worker dependent).
    """

    utilities: tuple[float, ...]
    costs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "utilities", _as_floats(self.utilities))
        object.__setattr__(self, "costs", _as_floats(self.costs))
        if len(self.utilities) != len(self.costs):
            raise InvalidScenarioError("utilities and costs must have equal length")
        if not self.utilities:
            raise InvalidScenarioError("catalog needs at least one task")
        if any(u <= 0 for u in self.utilities):
            raise InvalidScenarioError("every utility coefficient must be positive")
        if any(c < 0 for c in self.costs):
            raise InvalidScenarioError("completion costs must be non-negative")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "TaskCatalog":
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def size(self) -> int:
        return len(self.utilities)

    @property
    def task_ids(self) -> range:
        return range(1, self.size + 1)


@dataclass(frozen=True)
class Population:
    """Worker masses and the two quality capabilities.

    ``n_high`` workers can produce quality ``q_high``; the remaining
    ``n_total - n_high`` can only reach ``q_low``. The homogeneous case is
    expressed as ``n_high = 0``; ``q_low == q_high`` is rejected because the
    heterogeneous analysis requires a strict gap.
    """

    n_total: float
    n_high: float
    q_high: float
    q_low: float

    def __post_init__(self) -> None:
        if self.n_total < 0:
            raise InvalidScenarioError("n_total must be non-negative")
        if not 0 <= self.n_high <= self.n_total:
            raise InvalidScenarioError("n_high must lie in [0, n_total]")
        if self.q_low <= 0 or self.q_high <= 0:
            raise InvalidScenarioError("quality capabilities must be positive")
        if self.q_low >= self.q_high:
            raise InvalidScenarioError(
                "q_low must be strictly below q_high; model homogeneity as n_high = 0"
            )

    @property
    def n_low(self) -> float:
        return self.n_total - self.n_high


@dataclass(frozen=True)
class Mechanism:
    """Stage-I decision: per-task rewards and quality requirements."""

    rewards: tuple[float, ...]
    quality_reqs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rewards", _as_floats(self.rewards))
        object.__setattr__(self, "quality_reqs", _as_floats(self.quality_reqs))
        if len(self.rewards) != len(self.quality_reqs):
            raise InvalidScenarioError("rewards and quality_reqs must have equal length")
        if any(r < 0 for r in self.rewards):
            raise InvalidScenarioError("rewards must be non-negative")
        if any(q < 0 for q in self.quality_reqs):
            raise InvalidScenarioError("quality requirements must be non-negative")

    @property
    def size(self) -> int:
        return len(self.rewards)

    def validate_for(self, catalog: TaskCatalog, pop: Population) -> None:
        """Reject shape mismatches and requirements nobody can meet."""
        if self.size != catalog.size:
            raise InvalidScenarioError("mechanism length does not match catalog")
        if any(q > pop.q_high for q in self.quality_reqs):
            raise InvalidScenarioError(
                "a quality requirement exceeds q_high; no worker would be eligible"
            )

    def high_set(self, pop: Population) -> frozenset[int]:
        """Tasks only the high-quality class can take (q_low < Q_m <= q_high)."""
        return frozenset(
            m for m, q in enumerate(self.quality_reqs, start=1) if pop.q_low < q <= pop.q_high
        )

    def low_set(self, pop: Population) -> frozenset[int]:
        """Tasks open to both classes (Q_m <= q_low)."""
        return frozenset(m for m, q in enumerate(self.quality_reqs, start=1) if q <= pop.q_low)


class UtilityModel:
    """Pluggable concave revenue family.

    Implementations provide, per task, the revenue value U_m(x), its
    derivative U'_m(x), and the inverse of the derivative. U'_m must be
    strictly decreasing on x >= 0; ``inv_deriv`` may return a negative
    number for arguments above U'_m(0), which callers clamp to zero mass.
    """

    family: str = "abstract"

    def value(self, task_id: int, x: float) -> float:
        raise NotImplementedError

    def deriv(self, task_id: int, x: float) -> float:
        raise NotImplementedError

    def inv_deriv(self, task_id: int, t: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class LogUtility(UtilityModel):
    """Default logarithmic family: U_m(x) = u_m * ln(1 + x)."""

    coefficients: tuple[float, ...]
    family: str = field(default="log", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", _as_floats(self.coefficients))
        if any(u <= 0 for u in self.coefficients):
            raise InvalidScenarioError("log-utility coefficients must be positive")

    @classmethod
    def from_catalog(cls, catalog: TaskCatalog) -> "LogUtility":
        return cls(catalog.utilities)

    def value(self, task_id: int, x: float) -> float:
        return self.coefficients[task_id - 1] * math.log1p(x)

    def deriv(self, task_id: int, x: float) -> float:
        return self.coefficients[task_id - 1] / (1.0 + x)

    def inv_deriv(self, task_id: int, t: float) -> float:
        return self.coefficients[task_id - 1] / t - 1.0


@dataclass(frozen=True)
class SolverConfig:
    """Numerical tolerances, search budgets, and the experiment seed."""

    bisection_tol: float = 1e-10
    mass_tol: float = 1e-8
    tie_tol: float = 1e-9
    che_eps: float = 1e-3
    che_level_cap: int | None = None
    grasp_alpha: float = 0.5
    grasp_max_iter: int | None = None
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.bisection_tol <= 0 or self.mass_tol <= 0 or self.tie_tol <= 0:
            raise InvalidScenarioError("tolerances must be positive")
        if not 0 < self.che_eps < 1:
            raise InvalidScenarioError("che_eps must lie in (0, 1)")
        if not 0 <= self.grasp_alpha <= 1:
            raise InvalidScenarioError("grasp_alpha must lie in [0, 1]")

    def level_cap_for(self, tau: float) -> int:
        if self.che_level_cap is not None:
            return self.che_level_cap
        return max(1000, math.ceil(tau + 20.0 * math.sqrt(tau)))

    def grasp_iterations(self, n_tasks: int) -> int:
        if self.grasp_max_iter is not None:
            return self.grasp_max_iter
        return 20 * n_tasks


def eligible_tasks(q: float, mech: Mechanism) -> frozenset[int]:
    """Tasks whose quality requirement a capability-q worker meets."""
    return frozenset(m for m, req in enumerate(mech.quality_reqs, start=1) if q >= req)


def worker_payoff(
    choice: int | None,
    n_on_task: float,
    catalog: TaskCatalog,
    mech: Mechanism,
    q: float,
) -> float:
    """Payoff of one worker: equal reward share minus cost, 0 if abstaining.

    ``n_on_task`` counts the worker himself, so it must be at least 1 when a
    task is selected. Selecting a task one is ineligible for burns the cost
    without earning a share.
    """
    if choice is None or choice == 0:
        return 0.0
    if not 1 <= choice <= catalog.size:
        raise InvalidScenarioError(f"task id {choice} out of range")
    if n_on_task < 1:
        raise InvalidScenarioError("a selecting worker counts himself: n_on_task >= 1")
    cost = catalog.costs[choice - 1]
    if q >= mech.quality_reqs[choice - 1]:
        return mech.rewards[choice - 1] / n_on_task - cost
    return -cost


def requester_profit(
    mech: Mechanism,
    alloc: Sequence[float],
    util: UtilityModel,
) -> float:
    """Revenue minus total rewards: sum_m U_m(Q_m * N_m) - R_m."""
    if len(alloc) != mech.size:
        raise InvalidScenarioError("allocation length does not match mechanism")
    if any(n < 0 for n in alloc):
        raise InvalidScenarioError("allocation masses must be non-negative")
    total = 0.0
    for m in range(1, mech.size + 1):
        total += util.value(m, mech.quality_reqs[m - 1] * alloc[m - 1]) - mech.rewards[m - 1]
    return total
