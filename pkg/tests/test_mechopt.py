import math

import pytest

from chmech import (
    GuardViolationError,
    InvalidScenarioError,
    LogUtility,
    Population,
    SolverConfig,
    TaskCatalog,
    UtilityModel,
    exhaustive_set_search,
    grasp_search,
    grid_oracle_fixed_set,
    mechanism_from_masses,
    ne_solve,
    solve_fixed_set,
)

CAT3 = TaskCatalog((30.0, 12.0, 8.0), (2.0, 1.0, 3.0))
UTIL3 = LogUtility.from_catalog(CAT3)


def test_fixed_set_matches_grid_oracle():
    pop = Population(20.0, 4.0, 2.0, 1.0)
    for high_set in (frozenset(), frozenset({3}), frozenset({1, 2})):
        sol = solve_fixed_set(CAT3, pop, UTIL3, high_set)
        _, oracle_profit = grid_oracle_fixed_set(
            CAT3, pop, UTIL3, high_set, resolution=1e-2
        )
        assert sol.profit >= oracle_profit - 1e-3
        assert sum(sol.masses) <= pop.n_total + 1e-8


def test_fixed_set_homogeneous_closed_form():
    # Unconstrained single task: maximize u ln(1 + n) - c n at n = u/c - 1.
    cat = TaskCatalog((10.0,), (2.0,))
    pop = Population(100.0, 0.0, 2.0, 1.0)
    sol = solve_fixed_set(cat, pop, LogUtility.from_catalog(cat), frozenset())
    assert sol.masses[0] == pytest.approx(4.0, abs=1e-9)
    assert sol.profit == pytest.approx(10.0 * math.log(5.0) - 8.0, abs=1e-8)


def test_fixed_set_input_validation():
    pop = Population(20.0, 4.0, 2.0, 1.0)
    with pytest.raises(InvalidScenarioError):
        solve_fixed_set(CAT3, pop, UTIL3, frozenset({4}))
    homog = Population(20.0, 0.0, 2.0, 1.0)
    with pytest.raises(InvalidScenarioError):
        solve_fixed_set(CAT3, homog, UTIL3, frozenset({1}))


class _ShiftedLog(UtilityModel):
    """Same log family routed through the generic solver path."""

    family = "shifted-log"

    def __init__(self, coefficients):
        self.coefficients = tuple(coefficients)

    def value(self, task_id, x):
        return self.coefficients[task_id - 1] * math.log1p(x)

    def deriv(self, task_id, x):
        return self.coefficients[task_id - 1] / (1.0 + x)

    def inv_deriv(self, task_id, t):
        return self.coefficients[task_id - 1] / t - 1.0


def test_generic_path_agrees_with_compiled_path():
    pop = Population(20.0, 4.0, 2.0, 1.0)
    generic = _ShiftedLog(CAT3.utilities)
    for high_set in (frozenset(), frozenset({2}), frozenset({1, 3})):
        fast = solve_fixed_set(CAT3, pop, UTIL3, high_set)
        slow = solve_fixed_set(CAT3, pop, generic, high_set)
        assert fast.masses == pytest.approx(slow.masses, abs=1e-6)
        assert fast.profit == pytest.approx(slow.profit, abs=1e-8)


def test_mechanism_rewards_implement_masses():
    pop = Population(20.0, 4.0, 2.0, 1.0)
    sol = solve_fixed_set(CAT3, pop, UTIL3, frozenset({1}))
    near = mechanism_from_masses(CAT3, pop, sol.high_set, sol.masses, sol.profit)
    for i in range(CAT3.size):
        assert near.mechanism.rewards[i] == pytest.approx(
            CAT3.costs[i] * sol.masses[i]
        )
    # the posted mechanism induces exactly those masses at equilibrium
    alloc = ne_solve(CAT3, pop, near.mechanism)
    assert alloc.totals == pytest.approx(sol.masses, abs=1e-6)


def test_exhaustive_beats_every_subset():
    pop = Population(12.0, 5.0, 2.0, 1.0)
    best = exhaustive_set_search(CAT3, pop, UTIL3)
    for code in range(8):
        subset = frozenset(i + 1 for i in range(3) if (code >> i) & 1)
        sol = solve_fixed_set(CAT3, pop, UTIL3, subset)
        assert best.profit >= sol.profit - 1e-9
    assert best.provenance == "exhaustive"


def test_exhaustive_guard():
    m = 21
    cat = TaskCatalog((1.0,) * m, (1.0,) * m)
    pop = Population(10.0, 5.0, 2.0, 1.0)
    with pytest.raises(GuardViolationError):
        exhaustive_set_search(cat, pop, LogUtility.from_catalog(cat))


def test_grasp_deterministic_and_near_exhaustive():
    pop = Population(12.0, 5.0, 2.0, 1.0)
    cfg = SolverConfig(rng_seed=3)
    a = grasp_search(CAT3, pop, UTIL3, cfg)
    b = grasp_search(CAT3, pop, UTIL3, cfg)
    assert a == b
    exact = exhaustive_set_search(CAT3, pop, UTIL3, cfg)
    assert a.profit >= 0.98 * exact.profit
    assert a.provenance == "grasp"


def test_homogeneous_search_skips_enumeration():
    pop = Population(100.0, 0.0, 2.0, 1.0)
    result = exhaustive_set_search(CAT3, pop, UTIL3)
    assert result.provenance == "homogeneous-closed-form"
    assert all(q == 1.0 for q in result.mechanism.quality_reqs)
