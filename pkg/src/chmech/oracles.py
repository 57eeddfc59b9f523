"""Independent brute-force references for validating the analytic solvers.

``integer_br_dynamics`` plays the finite-player game directly: workers take
turns best-responding until a full round passes with no switch, which is an
exact finite Nash equilibrium. ``grid_oracle_fixed_set`` maximizes the
fixed-set profit by grid or line search without touching the multiplier
machinery. Both exist only to cross-check; they are deliberately slow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    GuardViolationError,
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
    UtilityModel,
    eligible_tasks,
)

__all__ = ["IntegerProfile", "integer_br_dynamics", "grid_oracle_fixed_set"]

INTEGER_WORKER_LIMIT = 200


@dataclass(frozen=True)
class IntegerProfile:
    """Converged strategy profile of the finite game.

    ``choices[w]`` is worker w's selected task id, or 0 for abstention;
    the first ``n_high`` workers form the high-quality class.
    """

    choices: tuple[int, ...]
    counts_high: tuple[int, ...]
    counts_low: tuple[int, ...]
    converged: bool
    rounds: int

    @property
    def counts_total(self) -> tuple[int, ...]:
        return tuple(h + l for h, l in zip(self.counts_high, self.counts_low))


def integer_br_dynamics(
    catalog: TaskCatalog,
    pop: Population,
    mech: Mechanism,
    max_rounds: int | None = None,
    seed: int = 0,
    cfg: SolverConfig = SolverConfig(),
) -> IntegerProfile:
    """Seeded asynchronous best-response dynamics with integer workers.

    Each round visits every worker once in a fresh random order (fixed
    orders can cycle in congestion games). A worker switches only when the
    best alternative beats his current payoff by more than the tie
    tolerance, so converged profiles are exact equilibria.
    """
    mech.validate_for(catalog, pop)
    n_total = int(round(pop.n_total))
    n_high = int(round(pop.n_high))
    if n_total > INTEGER_WORKER_LIMIT:
        raise GuardViolationError(f"integer oracle limited to {INTEGER_WORKER_LIMIT} workers")
    if max_rounds is None:
        max_rounds = 10 * n_total * catalog.size if n_total else 1

    quality = [pop.q_high if w < n_high else pop.q_low for w in range(n_total)]
    elig = {
        q: sorted(eligible_tasks(q, mech)) for q in {pop.q_high, pop.q_low}
    }
    choices = [0] * n_total
    counts = [0] * catalog.size
    rng = np.random.default_rng(seed)
    rewards = mech.rewards
    costs = catalog.costs

    converged = False
    rounds_used = 0
    for rnd in range(max_rounds):
        order = rng.permutation(n_total)
        moved = False
        for w in order:
            cur = choices[w]
            # Counts excluding this worker: a deviant counts himself (+1).
            if cur:
                counts[cur - 1] -= 1
            best_task = 0
            best_val = -math.inf
            for m in elig[quality[w]]:
                val = rewards[m - 1] / (counts[m - 1] + 1) - costs[m - 1]
                if val > best_val:
                    best_val = val
                    best_task = m
            cur_val = (
                rewards[cur - 1] / (counts[cur - 1] + 1) - costs[cur - 1] if cur else 0.0
            )
            tol = cfg.tie_tol * (1.0 + abs(cur_val))
            if best_val < 0:
                new = 0
            elif cur and best_val <= cur_val + tol:
                new = cur
            elif not cur and best_val <= tol:
                new = 0
            else:
                new = best_task
            if new:
                counts[new - 1] += 1
            if new != cur:
                moved = True
            choices[w] = new
        rounds_used = rnd + 1
        if not moved:
            converged = True
            break

    counts_high = [0] * catalog.size
    counts_low = [0] * catalog.size
    for w, c in enumerate(choices):
        if c:
            if w < n_high:
                counts_high[c - 1] += 1
            else:
                counts_low[c - 1] += 1
    return IntegerProfile(
        tuple(choices), tuple(counts_high), tuple(counts_low), converged, rounds_used
    )


def grid_oracle_fixed_set(
    catalog: TaskCatalog,
    pop: Population,
    util: UtilityModel,
    high_set: frozenset[int] | set[int],
    resolution: float = 1e-3,
    seed: int = 0,
) -> tuple[tuple[float, ...], float]:
    """Direct search for the fixed-set optimum, used only as a test oracle.

    Full grid for up to three tasks; coordinate golden-section with random
    restarts beyond that. Returns (masses, profit).
    """
    high_set = frozenset(high_set)
    m_count = catalog.size
    q_of = [pop.q_high if m in high_set else pop.q_low for m in catalog.task_ids]

    def profit(masses) -> float:
        total = sum(masses)
        if total > pop.n_total + 1e-12:
            return -math.inf
        if sum(masses[m - 1] for m in high_set) > pop.n_high + 1e-12:
            return -math.inf
        p = 0.0
        for i in range(m_count):
            p += util.value(i + 1, q_of[i] * masses[i]) - catalog.costs[i] * masses[i]
        return p

    def per_task_cap(i: int) -> float:
        cap = pop.n_total
        if (i + 1) in high_set:
            cap = min(cap, pop.n_high)
        return cap

    def coord_cap(i: int, masses) -> float:
        # Feasible range for coordinate i with the other masses held fixed.
        cap = pop.n_total - (sum(masses) - masses[i])
        if (i + 1) in high_set:
            others_high = sum(masses[m - 1] for m in high_set if m != i + 1)
            cap = min(cap, pop.n_high - others_high)
        return max(0.0, cap)

    if m_count <= 3:
        axes = []
        for i in range(m_count):
            cap = per_task_cap(i)
            steps = max(2, int(round(cap / max(resolution, cap / 400))) + 1)
            axes.append(np.linspace(0.0, cap, steps))
        best_m, best_p = (0.0,) * m_count, profit((0.0,) * m_count)
        grids = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([g.ravel() for g in grids], axis=1)
        for row in flat:
            p = profit(tuple(row))
            if p > best_p:
                best_p, best_m = p, tuple(float(x) for x in row)
        # Refine around the winner with per-coordinate golden sections.
        masses = list(best_m)
        for _ in range(4):
            for i in range(m_count):
                masses[i] = _golden_coord(profit, masses, i, coord_cap(i, masses))
        return tuple(masses), profit(tuple(masses))

    rng = np.random.default_rng(seed)
    best_m, best_p = None, -math.inf
    for restart in range(10):
        if restart == 0:
            masses = [0.0] * m_count
        else:
            masses = [float(rng.uniform(0, per_task_cap(i) / m_count)) for i in range(m_count)]
        for _ in range(6):
            for i in range(m_count):
                masses[i] = _golden_coord(profit, masses, i, coord_cap(i, masses))
        p = profit(tuple(masses))
        if p > best_p:
            best_p, best_m = p, tuple(masses)
    assert best_m is not None
    return best_m, best_p


def _golden_coord(profit, masses, i, cap, iters=60):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0

    def f(x):
        trial = list(masses)
        trial[i] = x
        return profit(tuple(trial))

    a, b = 0.0, cap
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    best_x = x1 if f1 >= f2 else x2
    best_f = max(f1, f2)
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
    if f(0.0) >= best_f:
        return 0.0
    return best_x
