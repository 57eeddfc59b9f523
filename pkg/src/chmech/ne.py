"""Continuum Nash equilibrium of the Stage-II task-selection game.

Workers are treated as a non-atomic continuum. At equilibrium every task
carrying positive high-class mass pays the common high-class payoff
``lambda_high``, every low-accessible task with positive low-class mass pays
``lambda_low``, and the class budgets bind exactly when the corresponding
multiplier is positive. Tasks whose reward does not cover their cost are
pre-filtered to zero allocation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    Mechanism,
    Population,
    SolverConfig,
    SolverConvergenceError,
    TaskCatalog,
)

__all__ = ["NeAllocation", "NeResidualReport", "ne_solve", "verify_ne"]


@dataclass(frozen=True)
class NeAllocation:
    """Aggregate equilibrium masses per task, split by worker class."""

    n_high_per_task: tuple[float, ...]
    n_low_per_task: tuple[float, ...]
    lambda_high: float
    lambda_low: float

    @property
    def totals(self) -> tuple[float, ...]:
        return tuple(h + l for h, l in zip(self.n_high_per_task, self.n_low_per_task))


@dataclass(frozen=True)
class NeResidualReport:
    """Maximum violation of each equilibrium condition, plus deviation margins.

    All residuals are non-negative; an allocation is an equilibrium (up to
    the configured mass tolerance) when every field is small. ``verify``
    never throws, it only reports.
    """

    high_best_response: float
    high_slackness: float
    low_on_high_tasks: float
    low_best_response: float
    low_slackness: float
    bounds: float
    deviation_margin_high: float
    deviation_margin_low: float

    @property
    def max_residual(self) -> float:
        return max(
            self.high_best_response,
            self.high_slackness,
            self.low_on_high_tasks,
            self.low_best_response,
            self.low_slackness,
            self.bounds,
            self.deviation_margin_high,
            self.deviation_margin_low,
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "high_best_response": self.high_best_response,
            "high_slackness": self.high_slackness,
            "low_on_high_tasks": self.low_on_high_tasks,
            "low_best_response": self.low_best_response,
            "low_slackness": self.low_slackness,
            "bounds": self.bounds,
            "deviation_margin_high": self.deviation_margin_high,
            "deviation_margin_low": self.deviation_margin_low,
        }


def _root_nonincreasing(f, budget, hi_cap, target_tol, accept_tol, max_iter=200):
    """Smallest lam >= 0 with f(lam) ~= budget for non-increasing f.

    Returns 0 when demand at zero already fits the budget. Saturates at
    ``hi_cap`` when even the cap cannot push demand down to the budget but
    the overshoot is within ``accept_tol`` (empty-class degeneracy).
    """
    if f(0.0) <= budget + target_tol:
        return 0.0
    hi = 1.0
    while f(hi) > budget and hi < hi_cap:
        hi = min(hi * 8.0, hi_cap)
    if f(hi) > budget:
        if f(hi) - budget <= accept_tol:
            return hi
        raise SolverConvergenceError("multiplier bracket saturated without meeting budget")
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        v = f(mid)
        if abs(v - budget) <= target_tol:
            return mid
        if v > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * (1.0 + hi):
            break
    mid = 0.5 * (lo + hi)
    if abs(f(mid) - budget) <= accept_tol:
        return mid
    raise SolverConvergenceError("bisection did not converge within 200 iterations")


def ne_solve(
    catalog: TaskCatalog,
    pop: Population,
    mech: Mechanism,
    cfg: SolverConfig = SolverConfig(),
) -> NeAllocation:
    """Compute the continuum equilibrium allocation for a fixed mechanism.

    The two class multipliers are found by scalar bisection on the monotone
    per-class demand curves. Three regimes occur: both multipliers zero
    (spare capacity everywhere), separated multipliers with the high class
    confined to the high-requirement tasks, and a pooled regime where both
    classes share the low-requirement tasks at a common payoff.
    """
    mech.validate_for(catalog, pop)
    m_count = catalog.size
    rewards = mech.rewards
    costs = catalog.costs
    high_ids = mech.high_set(pop)
    low_ids = mech.low_set(pop)
    active = [rewards[i] > 0 and rewards[i] >= costs[i] for i in range(m_count)]

    def task_mass(i: int, lam: float) -> float:
        return rewards[i] / (costs[i] + lam) if active[i] else 0.0

    def demand_high(lam: float) -> float:
        return sum(task_mass(m - 1, lam) for m in high_ids)

    def demand_low(lam: float) -> float:
        return sum(task_mass(m - 1, lam) for m in low_ids)

    max_reward = max(rewards) if any(active) else 0.0

    def lam_cap(budget: float) -> float:
        # Large enough that demand at the cap falls below the budget; tiny
        # budgets need proportionally larger multipliers.
        floor = min(cfg.mass_tol, budget) if budget > 0 else cfg.mass_tol
        return max(1.0, m_count * max_reward / floor)

    target = min(cfg.mass_tol * 1e-3, 1e-11) * (1.0 + pop.n_total)

    n_high = [0.0] * m_count
    n_low = [0.0] * m_count
    if not any(active):
        return NeAllocation(tuple(n_high), tuple(n_low), 0.0, 0.0)

    lam1 = _root_nonincreasing(demand_high, pop.n_high, lam_cap(pop.n_high), target, cfg.mass_tol)
    lam2 = _root_nonincreasing(demand_low, pop.n_low, lam_cap(pop.n_low), target, cfg.mass_tol)

    def overshoot_scale(demand: float, budget: float) -> float:
        # A saturated multiplier can leave demand a hair above the budget
        # (degenerately small classes); rescale so the budget binds exactly.
        if demand > budget > 0.0:
            return budget / demand
        if demand > budget:
            return 0.0
        return 1.0

    if lam2 <= lam1:
        # Separated: low tasks carry only low workers, high tasks only high.
        sh = overshoot_scale(demand_high(lam1), pop.n_high)
        sl = overshoot_scale(demand_low(lam2), pop.n_low)
        for m in high_ids:
            n_high[m - 1] = task_mass(m - 1, lam1) * sh
        for m in low_ids:
            n_low[m - 1] = task_mass(m - 1, lam2) * sl
        return NeAllocation(tuple(n_high), tuple(n_low), lam1, lam2)

    # Pooled: leftover high workers spill into the low tasks at a common payoff.
    def demand_all(lam: float) -> float:
        return demand_high(lam) + demand_low(lam)

    lam = _root_nonincreasing(demand_all, pop.n_total, lam_cap(pop.n_total), target, cfg.mass_tol)
    sa = overshoot_scale(demand_all(lam), pop.n_total)
    low_total = demand_low(lam) * sa
    fill = pop.n_low / low_total if low_total > 0 else 0.0
    fill = min(fill, 1.0)
    for m in high_ids:
        n_high[m - 1] = task_mass(m - 1, lam) * sa
    for m in low_ids:
        total = task_mass(m - 1, lam) * sa
        n_low[m - 1] = total * fill
        n_high[m - 1] = total - n_low[m - 1]
    return NeAllocation(tuple(n_high), tuple(n_low), lam, lam)


def verify_ne(
    catalog: TaskCatalog,
    pop: Population,
    mech: Mechanism,
    alloc: NeAllocation,
    cfg: SolverConfig = SolverConfig(),
) -> NeResidualReport:
    """Report how far a candidate allocation is from the equilibrium conditions."""
    m_count = catalog.size
    if len(alloc.n_high_per_task) != m_count or len(alloc.n_low_per_task) != m_count:
        raise ValueError("allocation shape does not match catalog")
    rewards = mech.rewards
    costs = catalog.costs
    high_ids = mech.high_set(pop)
    low_ids = mech.low_set(pop)
    active = [rewards[i] > 0 and rewards[i] >= costs[i] for i in range(m_count)]
    lam1, lam2 = alloc.lambda_high, alloc.lambda_low
    nh, nl = alloc.n_high_per_task, alloc.n_low_per_task

    r_high_br = 0.0
    r_low_br = 0.0
    r_low_zero = 0.0
    for i in range(m_count):
        m = i + 1
        if not active[i]:
            # Pre-filtered task: any mass on it is a violation.
            r_high_br = max(r_high_br, nh[i])
            r_low_br = max(r_low_br, nl[i])
            continue
        want_high = max(0.0, rewards[i] / (costs[i] + lam1) - nl[i])
        r_high_br = max(r_high_br, abs(nh[i] - want_high))
        if m in high_ids:
            r_low_zero = max(r_low_zero, nl[i])
        if m in low_ids:
            want_low = max(0.0, rewards[i] / (costs[i] + lam2) - nh[i])
            r_low_br = max(r_low_br, abs(nl[i] - want_low))

    sum_high = sum(nh)
    sum_low = sum(nl)
    r_high_slack = abs(lam1 * (pop.n_high - sum_high))
    r_low_slack = abs(lam2 * (pop.n_low - sum_low))
    r_bounds = max(
        0.0,
        -lam1,
        -lam2,
        sum_high - pop.n_high,
        sum_low - pop.n_low,
        max(-min(nh), 0.0),
        max(-min(nl), 0.0),
    )

    def switch_payoff(i: int) -> float:
        total = nh[i] + nl[i]
        if total > 0:
            return rewards[i] / total - costs[i]
        return rewards[i] - costs[i]

    # A zero-mass deviant joining task m earns the task's current payoff; no
    # task may beat the class payoff floor by more than the tolerance.
    floor_high = lam1 if sum_high >= pop.n_high - cfg.mass_tol else 0.0
    floor_low = lam2 if sum_low >= pop.n_low - cfg.mass_tol else 0.0
    margin_high = 0.0
    margin_low = 0.0
    for i in range(m_count):
        m = i + 1
        gain = switch_payoff(i)
        margin_high = max(margin_high, gain - max(floor_high, 0.0))
        if m in low_ids:
            margin_low = max(margin_low, gain - max(floor_low, 0.0))

    return NeResidualReport(
        high_best_response=r_high_br,
        high_slackness=r_high_slack,
        low_on_high_tasks=r_low_zero,
        low_best_response=r_low_br,
        low_slackness=r_low_slack,
        bounds=r_bounds,
        deviation_margin_high=margin_high,
        deviation_margin_low=margin_low,
    )
