"""Requester Stage-I optimization under full rationality.

For a fixed set of high-requirement tasks the profit problem is concave and
separable, so the optimal masses follow from equalizing marginal revenue
against two multipliers (total capacity and high-class capacity) found by
scalar bisection. The high-set itself is chosen either exhaustively or by a
greedy randomized multi-restart search.

The log-utility family gets a compiled fast path so exhaustive enumeration
stays affordable up to the 2^20-subset guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit

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
)

__all__ = [
    "FixedSetSolution",
    "NearOptMechanism",
    "solve_fixed_set",
    "mechanism_from_masses",
    "exhaustive_set_search",
    "grasp_search",
]

EXHAUSTIVE_TASK_LIMIT = 20


@dataclass(frozen=True)
class FixedSetSolution:
    """Optimal worker masses for one candidate high-requirement task set."""

    high_set: frozenset[int]
    masses: tuple[float, ...]
    mu_total: float
    nu_high: float
    profit: float


@dataclass(frozen=True)
class NearOptMechanism:
    """A Stage-I mechanism together with the masses and profit it induces."""

    mechanism: Mechanism
    masses: tuple[float, ...]
    profit: float
    provenance: str


# ---------------------------------------------------------------------------
# Compiled fast path, log family only.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _demand_log(u, c, qv, sel, lam):
    s = 0.0
    for i in range(u.size):
        if sel[i]:
            d = u[i] / (c[i] + lam) - 1.0 / qv[i]
            if d > 0.0:
                s += d
    return s


@njit(cache=True)
def _root_log(u, c, qv, sel, budget, cap, target):
    if _demand_log(u, c, qv, sel, 0.0) <= budget + target:
        return 0.0
    hi = 1.0
    while _demand_log(u, c, qv, sel, hi) > budget and hi < cap:
        hi = min(hi * 8.0, cap)
    if _demand_log(u, c, qv, sel, hi) > budget:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = _demand_log(u, c, qv, sel, mid)
        if abs(v - budget) <= target:
            return mid
        if v > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def _solve_log(u, c, qv, hmask, n_total, n_high, target):
    m_count = u.size
    lsel = np.empty(m_count, dtype=np.bool_)
    allsel = np.empty(m_count, dtype=np.bool_)
    cap = 1.0
    for i in range(m_count):
        lsel[i] = not hmask[i]
        allsel[i] = True
        edge = u[i] * qv[i] - c[i]
        if edge + 1.0 > cap:
            cap = edge + 1.0

    nu0 = _root_log(u, c, qv, hmask, n_high, cap, target)
    total0 = _demand_log(u, c, qv, lsel, 0.0) + _demand_log(u, c, qv, hmask, nu0)
    if total0 <= n_total + target:
        mu = 0.0
        nu = nu0
    else:
        mu_joint = _root_log(u, c, qv, allsel, n_total, cap, target)
        if _demand_log(u, c, qv, hmask, mu_joint) <= n_high + 10.0 * target:
            mu = mu_joint
            nu = 0.0
        else:
            s = _root_log(u, c, qv, hmask, n_high, cap, target)
            mu = _root_log(u, c, qv, lsel, n_total - n_high, cap, target)
            nu = s - mu
            if nu < 0.0:
                nu = 0.0

    masses = np.zeros(m_count)
    profit = 0.0
    for i in range(m_count):
        shift = mu + (nu if hmask[i] else 0.0)
        d = u[i] / (c[i] + shift) - 1.0 / qv[i]
        if d > 0.0:
            masses[i] = d
            profit += u[i] * math.log1p(qv[i] * d) - c[i] * d
    return masses, mu, nu, profit


@njit(cache=True)
def _exhaustive_log(u, c, q_high, q_low, n_total, n_high, target):
    m_count = u.size
    qv = np.empty(m_count)
    hmask = np.empty(m_count, dtype=np.bool_)
    best_profit = -1e300
    best_code = 0
    best_size = m_count + 1
    for code in range(1 << m_count):
        if n_high <= 0.0 and code != 0:
            continue
        size = 0
        for i in range(m_count):
            bit = (code >> i) & 1 == 1
            hmask[i] = bit
            if bit:
                size += 1
                qv[i] = q_high
            else:
                qv[i] = q_low
        _, _, _, profit = _solve_log(u, c, qv, hmask, n_total, n_high, target)
        tie = 1e-9 * (1.0 + abs(best_profit))
        if profit > best_profit + tie:
            best_profit = profit
            best_code = code
            best_size = size
        elif profit > best_profit - tie:
            take = False
            if size < best_size:
                take = True
            elif size == best_size:
                # Equal-size tie: prefer the set whose first differing task
                # id is smaller (lexicographic on sorted ids).
                for i in range(m_count):
                    a = (code >> i) & 1
                    b = (best_code >> i) & 1
                    if a != b:
                        take = a == 1
                        break
            if take:
                best_profit = profit
                best_code = code
                best_size = size
    return best_code, best_profit


# ---------------------------------------------------------------------------
# Generic path, any utility family.
# ---------------------------------------------------------------------------


def _generic_solve(catalog, pop, util, high_set, cfg):
    m_count = catalog.size
    costs = catalog.costs
    q_of = [pop.q_high if m in high_set else pop.q_low for m in catalog.task_ids]

    def task_demand(i: int, shift: float) -> float:
        q = q_of[i]
        x = util.inv_deriv(i + 1, (costs[i] + shift) / q)
        return max(0.0, x / q)

    def demand(ids, shift):
        return sum(task_demand(m - 1, shift) for m in ids)

    high_ids = sorted(high_set)
    low_ids = [m for m in catalog.task_ids if m not in high_set]
    cap = 1.0
    for i in range(m_count):
        cap = max(cap, util.deriv(i + 1, 0.0) * q_of[i] - costs[i] + 1.0)
    target = min(cfg.mass_tol * 1e-3, 1e-11) * (1.0 + pop.n_total)

    def root(ids, budget):
        def f(lam):
            return demand(ids, lam)

        if f(0.0) <= budget + target:
            return 0.0
        hi = 1.0
        while f(hi) > budget and hi < cap:
            hi = min(hi * 8.0, cap)
        if f(hi) > budget:
            if f(hi) - budget <= cfg.mass_tol:
                return hi
            raise SolverConvergenceError("fixed-set multiplier bracket saturated")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            v = f(mid)
            if abs(v - budget) <= target:
                return mid
            if v > budget:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * (1.0 + hi):
                break
        mid = 0.5 * (lo + hi)
        if abs(f(mid) - budget) <= cfg.mass_tol:
            return mid
        raise SolverConvergenceError("fixed-set bisection exceeded 200 iterations")

    nu0 = root(high_ids, pop.n_high)
    total0 = demand(low_ids, 0.0) + demand(high_ids, nu0)
    if total0 <= pop.n_total + target:
        mu, nu = 0.0, nu0
    else:
        mu_joint = root(list(catalog.task_ids), pop.n_total)
        if demand(high_ids, mu_joint) <= pop.n_high + 10.0 * target:
            mu, nu = mu_joint, 0.0
        else:
            s = root(high_ids, pop.n_high)
            mu = root(low_ids, pop.n_total - pop.n_high)
            nu = max(0.0, s - mu)

    masses = []
    profit = 0.0
    for i in range(m_count):
        shift = mu + (nu if (i + 1) in high_set else 0.0)
        n = task_demand(i, shift)
        masses.append(n)
        profit += util.value(i + 1, q_of[i] * n) - costs[i] * n
    return tuple(masses), mu, nu, profit


def _log_coeffs(util: UtilityModel) -> np.ndarray | None:
    if isinstance(util, LogUtility):
        return np.asarray(util.coefficients, dtype=np.float64)
    return None


def solve_fixed_set(
    catalog: TaskCatalog,
    pop: Population,
    util: UtilityModel,
    high_set: frozenset[int] | set[int],
    cfg: SolverConfig = SolverConfig(),
) -> FixedSetSolution:
    """Optimal masses for a fixed high-requirement task set (concave program)."""
    high_set = frozenset(high_set)
    if any(m < 1 or m > catalog.size for m in high_set):
        raise InvalidScenarioError("high_set contains an out-of-range task id")
    if pop.n_high == 0 and high_set:
        raise InvalidScenarioError("high_set must be empty when there are no high workers")

    coeffs = _log_coeffs(util)
    if coeffs is not None:
        c = np.asarray(catalog.costs, dtype=np.float64)
        hmask = np.zeros(catalog.size, dtype=np.bool_)
        for m in high_set:
            hmask[m - 1] = True
        qv = np.where(hmask, pop.q_high, pop.q_low)
        target = min(cfg.mass_tol * 1e-3, 1e-11) * (1.0 + pop.n_total)
        masses, mu, nu, profit = _solve_log(
            coeffs, c, qv, hmask, float(pop.n_total), float(pop.n_high), target
        )
        return FixedSetSolution(high_set, tuple(masses.tolist()), mu, nu, profit)

    masses, mu, nu, profit = _generic_solve(catalog, pop, util, high_set, cfg)
    return FixedSetSolution(high_set, masses, mu, nu, profit)


def mechanism_from_masses(
    catalog: TaskCatalog,
    pop: Population,
    high_set: frozenset[int] | set[int],
    masses: tuple[float, ...],
    profit: float | None = None,
    provenance: str = "fixed-set",
    util: UtilityModel | None = None,
) -> NearOptMechanism:
    """Rewards and requirements that implement given masses at equilibrium.

    Setting R_m = c_m * N_m with Q_m at the class capability leaves every
    participating worker exactly compensated, so the masses are the induced
    equilibrium and the requester keeps the whole surplus.
    """
    high_set = frozenset(high_set)
    rewards = tuple(catalog.costs[i] * masses[i] for i in range(catalog.size))
    quality = tuple(
        pop.q_high if (i + 1) in high_set else pop.q_low for i in range(catalog.size)
    )
    mech = Mechanism(rewards, quality)
    if profit is None:
        if util is None:
            util = LogUtility.from_catalog(catalog)
        profit = sum(
            util.value(i + 1, quality[i] * masses[i]) - rewards[i]
            for i in range(catalog.size)
        )
    return NearOptMechanism(mech, tuple(masses), profit, provenance)


def exhaustive_set_search(
    catalog: TaskCatalog,
    pop: Population,
    util: UtilityModel,
    cfg: SolverConfig = SolverConfig(),
) -> NearOptMechanism:
    """Best high-set over all subsets; ties go to smaller, then earlier, sets."""
    if catalog.size > EXHAUSTIVE_TASK_LIMIT:
        raise GuardViolationError(
            f"exhaustive search is limited to {EXHAUSTIVE_TASK_LIMIT} tasks"
        )
    if pop.n_high == 0:
        sol = solve_fixed_set(catalog, pop, util, frozenset(), cfg)
        return mechanism_from_masses(
            catalog, pop, sol.high_set, sol.masses, sol.profit, "homogeneous-closed-form", util
        )

    coeffs = _log_coeffs(util)
    if coeffs is not None:
        c = np.asarray(catalog.costs, dtype=np.float64)
        target = min(cfg.mass_tol * 1e-3, 1e-11) * (1.0 + pop.n_total)
        code, _ = _exhaustive_log(
            coeffs, c, pop.q_high, pop.q_low, float(pop.n_total), float(pop.n_high), target
        )
        best_set = frozenset(i + 1 for i in range(catalog.size) if (code >> i) & 1)
    else:
        best_set = frozenset()
        best_profit = -math.inf
        best_size = catalog.size + 1
        for size in range(catalog.size + 1):
            for combo in combinations(catalog.task_ids, size):
                sol = solve_fixed_set(catalog, pop, util, frozenset(combo), cfg)
                tie = 1e-9 * (1.0 + abs(best_profit))
                if sol.profit > best_profit + tie:
                    best_profit, best_set, best_size = sol.profit, sol.high_set, size

    sol = solve_fixed_set(catalog, pop, util, best_set, cfg)
    return mechanism_from_masses(
        catalog, pop, sol.high_set, sol.masses, sol.profit, "exhaustive", util
    )


def grasp_search(
    catalog: TaskCatalog,
    pop: Population,
    util: UtilityModel,
    cfg: SolverConfig = SolverConfig(),
) -> NearOptMechanism:
    """Greedy randomized multi-restart construction of the high-set.

    Each restart grows the set one task at a time: candidate profits are
    thresholded at P_l + alpha * (P_h - P_l), one candidate above the
    threshold is drawn uniformly, and the restart stops at the first draw
    that fails to keep profit from decreasing. Deterministic for a fixed
    seed; restart r uses the substream (rng_seed, r).
    """
    empty = solve_fixed_set(catalog, pop, util, frozenset(), cfg)
    best_set, best_profit = empty.high_set, empty.profit
    if pop.n_high > 0 and catalog.size > 0:
        max_iter = cfg.grasp_iterations(catalog.size)
        all_ids = list(catalog.task_ids)
        for restart in range(max_iter):
            rng = np.random.default_rng([cfg.rng_seed, restart])
            current: set[int] = set()
            profit = empty.profit
            for _ in range(catalog.size):
                remaining = [m for m in all_ids if m not in current]
                if not remaining:
                    break
                cand = [
                    solve_fixed_set(catalog, pop, util, frozenset(current | {j}), cfg).profit
                    for j in remaining
                ]
                p_h, p_l = max(cand), min(cand)
                threshold = p_l + cfg.grasp_alpha * (p_h - p_l)
                shortlist = [
                    (j, p) for j, p in zip(remaining, cand) if p >= threshold
                ]
                j_star, p_star = shortlist[int(rng.integers(len(shortlist)))]
                if p_star >= profit:
                    current.add(j_star)
                    profit = p_star
                else:
                    break
            if profit > best_profit:
                best_profit = profit
                best_set = frozenset(current)

    sol = solve_fixed_set(catalog, pop, util, best_set, cfg)
    return mechanism_from_masses(
        catalog, pop, sol.high_set, sol.masses, sol.profit, "grasp", util
    )
