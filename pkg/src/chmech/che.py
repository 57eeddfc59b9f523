"""Bounded-rational Stage-II simulation via a cognitive-hierarchy cascade.

Worker reasoning levels follow a Poisson(tau) distribution. Level-0 workers
spread uniformly over the tasks they are eligible for; a level-(k+1) worker
treats the normalized cumulative choices of levels 0..k as the whole
population, computes the payoff he would get on each task under that
belief, and puts his weight on the best non-negative option. The cascade
stops once the covered Poisson mass exceeds 1 - eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .model import (
    GuardViolationError,
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
    UtilityModel,
)

__all__ = [
    "CheConfig",
    "CheLevelRecord",
    "CheOutcome",
    "poisson_pmf",
    "che_run",
    "che_requester_search",
]

CHE_SEARCH_TASK_LIMIT = 6


@dataclass(frozen=True)
class CheConfig:
    """Average cognitive level and cascade truncation controls."""

    tau: float
    eps: float = 1e-3
    level_cap: int | None = None

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.level_cap is not None and self.level_cap < 1:
            raise ValueError("level_cap must be at least 1")

    def resolved_level_cap(self) -> int:
        if self.level_cap is not None:
            return self.level_cap
        return max(1000, math.ceil(self.tau + 20.0 * math.sqrt(self.tau)))


@dataclass(frozen=True)
class CheLevelRecord:
    """One cascade step: level fractions chosen and the payoffs believed next."""

    level: int
    f_k: float
    tf: float
    e_high: tuple[float, ...]
    e_low: tuple[float, ...]
    payoffs: tuple[float, ...]


@dataclass(frozen=True)
class CheOutcome:
    """Cumulative task masses and the full per-level trace."""

    n_high_per_task: tuple[float, ...]
    n_low_per_task: tuple[float, ...]
    tf_final: float
    trace: tuple[CheLevelRecord, ...]
    converged: bool

    @property
    def totals(self) -> tuple[float, ...]:
        return tuple(h + l for h, l in zip(self.n_high_per_task, self.n_low_per_task))


def poisson_pmf(k: int, tau: float) -> float:
    """Poisson mass tau^k e^-tau / k!, evaluated in log space for large k."""
    if k < 0 or k != int(k):
        raise ValueError("k must be a non-negative integer")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if k <= 20:
        return tau**k * math.exp(-tau) / math.factorial(k)
    return math.exp(k * math.log(tau) - tau - math.lgamma(k + 1))


def che_run(
    catalog: TaskCatalog,
    pop: Population,
    mech: Mechanism,
    che_cfg: CheConfig,
    cfg: SolverConfig = SolverConfig(),
) -> CheOutcome:
    """Run the level-by-level cascade for a fixed mechanism.

    Tasks whose reward does not cover the cost are dropped up front: no
    level ever selects them. If no low-accessible task survives, the low
    class abstains entirely.
    """
    mech.validate_for(catalog, pop)
    m_count = catalog.size
    rewards = mech.rewards
    costs = catalog.costs
    high_ids = mech.high_set(pop)
    active = [rewards[i] > 0 and rewards[i] >= costs[i] for i in range(m_count)]
    high_elig = [i for i in range(m_count) if active[i]]
    low_elig = [i for i in range(m_count) if active[i] and (i + 1) not in high_ids]
    n_high_class = pop.n_high
    n_low_class = pop.n_low
    eps = che_cfg.eps
    cap = che_cfg.resolved_level_cap()

    e_high = [0.0] * m_count
    e_low = [0.0] * m_count
    if high_elig:
        for i in high_elig:
            e_high[i] = 1.0 / len(high_elig)
    if low_elig:
        for i in low_elig:
            e_low[i] = 1.0 / len(low_elig)

    nh = [0.0] * m_count
    nl = [0.0] * m_count
    tf = 0.0
    trace: list[CheLevelRecord] = []
    converged = False
    k = 0
    while True:
        f_k = poisson_pmf(k, che_cfg.tau)
        for i in range(m_count):
            nh[i] += n_high_class * f_k * e_high[i]
            nl[i] += n_low_class * f_k * e_low[i]
        tf += f_k

        # Believed payoff on each task for a level-(k+1) worker, who takes
        # the normalized cumulative masses of levels 0..k as the population.
        payoffs = [0.0] * m_count
        for i in range(m_count):
            if not active[i]:
                payoffs[i] = rewards[i] - costs[i]
                continue
            believed = nh[i] if (i + 1) in high_ids else nh[i] + nl[i]
            believed /= tf
            if believed > 0:
                payoffs[i] = rewards[i] / believed - costs[i]
            else:
                payoffs[i] = rewards[i] - costs[i]

        trace.append(
            CheLevelRecord(k, f_k, tf, tuple(e_high), tuple(e_low), tuple(payoffs))
        )
        if tf > 1.0 - eps:
            converged = True
            break
        if k + 1 >= cap:
            break

        e_high = _argmax_fractions(payoffs, high_elig, cfg.tie_tol, m_count)
        e_low = _argmax_fractions(payoffs, low_elig, cfg.tie_tol, m_count)
        k += 1

    return CheOutcome(tuple(nh), tuple(nl), tf, tuple(trace), converged)


def _argmax_fractions(payoffs, candidate_idx, tie_tol, m_count):
    """Spread one unit equally over the near-maximal tasks, or abstain."""
    out = [0.0] * m_count
    if not candidate_idx:
        return out
    best = max(payoffs[i] for i in candidate_idx)
    if best < 0:
        return out
    slack = tie_tol * (1.0 + abs(best))
    winners = [i for i in candidate_idx if payoffs[i] >= best - slack]
    share = 1.0 / len(winners)
    for i in winners:
        out[i] = share
    return out


def _golden_max(f, lo: float, hi: float, iters: int = 36) -> tuple[float, float]:
    """Golden-section maximization that remembers the best evaluated point."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    for _ in range(iters):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        if f1 > best_f:
            best_x, best_f = x1, f1
        if f2 > best_f:
            best_x, best_f = x2, f2
    return best_x, best_f


def che_requester_search(
    catalog: TaskCatalog,
    pop: Population,
    util: UtilityModel,
    che_cfg: CheConfig,
    cfg: SolverConfig = SolverConfig(),
) -> tuple[Mechanism, CheOutcome, float]:
    """Numerically search the requester's best rewards and quality flags
    under the bounded-rational cascade.

    Enumerates the binary quality vectors, then runs a cyclic coordinate
    golden-section search on each reward over [c_m, 2 c_m N] with a few
    seeded multi-starts. Deterministic given the config seed.
    """
    m_count = catalog.size
    if m_count > CHE_SEARCH_TASK_LIMIT:
        raise GuardViolationError(
            f"reward search is limited to {CHE_SEARCH_TASK_LIMIT} tasks"
        )
    from .mechopt import solve_fixed_set  # local import avoids a cycle

    best: tuple[Mechanism, CheOutcome, float] | None = None
    for flags_index, flags in enumerate(product((0, 1), repeat=m_count)):
        if pop.n_high == 0 and any(flags):
            continue
        high_set = frozenset(i + 1 for i in range(m_count) if flags[i])
        quality = tuple(
            pop.q_high if flags[i] else pop.q_low for i in range(m_count)
        )

        def profit_of(rvec: list[float]) -> tuple[float, CheOutcome]:
            mech = Mechanism(tuple(rvec), quality)
            outcome = che_run(catalog, pop, mech, che_cfg, cfg)
            totals = outcome.totals
            p = sum(
                util.value(i + 1, quality[i] * totals[i]) - rvec[i]
                for i in range(m_count)
            )
            return p, outcome

        fr = solve_fixed_set(catalog, pop, util, high_set, cfg)
        fr_rewards = [catalog.costs[i] * fr.masses[i] for i in range(m_count)]
        rng = np.random.default_rng([cfg.rng_seed, 2, flags_index])
        lo = list(catalog.costs)
        hi = [2.0 * catalog.costs[i] * pop.n_total for i in range(m_count)]
        starts = [
            [max(lo[i], min(fr_rewards[i], hi[i])) for i in range(m_count)],
            list(lo),
            [float(rng.uniform(lo[i], hi[i])) for i in range(m_count)],
        ]

        for start in starts:
            rvec = list(start)
            current_p, current_out = profit_of(rvec)
            for _ in range(5):
                for i in range(m_count):
                    if hi[i] <= lo[i]:
                        continue

                    def coord(x: float, i=i) -> float:
                        trial = list(rvec)
                        trial[i] = x
                        return profit_of(trial)[0]

                    x_best, p_best = _golden_max(coord, lo[i], hi[i])
                    if p_best > current_p:
                        rvec[i] = x_best
                        current_p, current_out = profit_of(rvec)
            if best is None or current_p > best[2]:
                best = (Mechanism(tuple(rvec), quality), current_out, current_p)

    assert best is not None
    return best
