import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chmech import (
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
    ne_solve,
    verify_ne,
)

POP_HOMOG = Population(100.0, 0.0, 2.0, 1.0)


def test_interior_equilibrium_two_tasks():
    # Plenty of workers: every task fills until the payoff hits zero,
    # so N_m = R_m / c_m and both multipliers vanish.
    cat = TaskCatalog((1.0, 1.0), (2.0, 4.0))
    mech = Mechanism((10.0, 12.0), (1.0, 1.0))
    alloc = ne_solve(cat, POP_HOMOG, mech)
    assert alloc.totals == pytest.approx((5.0, 3.0), abs=1e-8)
    assert alloc.lambda_low == 0.0 and alloc.lambda_high == 0.0


def test_binding_budget_equalizes_payoffs():
    cat = TaskCatalog((1.0, 1.0), (1.0, 1.0))
    mech = Mechanism((10.0, 30.0), (1.0, 1.0))
    pop = Population(4.0, 0.0, 2.0, 1.0)
    alloc = ne_solve(cat, pop, mech)
    assert sum(alloc.totals) == pytest.approx(4.0, abs=1e-8)
    # equal payoff across both occupied tasks
    p1 = mech.rewards[0] / alloc.totals[0] - 1.0
    p2 = mech.rewards[1] / alloc.totals[1] - 1.0
    assert p1 == pytest.approx(p2, abs=1e-6)
    assert alloc.lambda_low == pytest.approx(p1, abs=1e-6)


def test_unprofitable_task_gets_no_mass():
    cat = TaskCatalog((1.0, 1.0), (1.0, 5.0))
    mech = Mechanism((10.0, 3.0), (1.0, 1.0))
    alloc = ne_solve(cat, POP_HOMOG, mech)
    assert alloc.totals[1] == 0.0


def test_pooled_regime_spillover():
    # One high task with a small reward cannot absorb the high class, so
    # leftover high workers share the low tasks at a common payoff.
    cat = TaskCatalog((1.0, 1.0), (1.0, 1.0))
    mech = Mechanism((2.0, 40.0), (2.0, 1.0))
    pop = Population(10.0, 8.0, 2.0, 1.0)
    alloc = ne_solve(cat, pop, mech)
    assert alloc.lambda_high == pytest.approx(alloc.lambda_low)
    assert alloc.n_high_per_task[1] > 0.0
    assert sum(alloc.totals) == pytest.approx(10.0, abs=1e-7)
    report = verify_ne(cat, pop, mech, alloc)
    assert report.max_residual <= 1e-6


def test_verify_flags_bad_allocation():
    cat = TaskCatalog((1.0, 1.0), (1.0, 1.0))
    mech = Mechanism((10.0, 10.0), (1.0, 1.0))
    pop = Population(4.0, 0.0, 2.0, 1.0)
    good = ne_solve(cat, pop, mech)
    bad = type(good)(
        good.n_high_per_task,
        (good.n_low_per_task[0] + 1.5, good.n_low_per_task[1] - 1.5),
        good.lambda_high,
        good.lambda_low,
    )
    assert verify_ne(cat, pop, mech, good).max_residual <= 1e-6
    assert verify_ne(cat, pop, mech, bad).max_residual > 0.1


@settings(max_examples=60, deadline=None)
@given(
    rewards=st.lists(st.floats(0.5, 60.0), min_size=1, max_size=4),
    costs_seed=st.integers(0, 10_000),
    n_total=st.floats(2.0, 120.0),
    high_share=st.floats(0.0, 1.0),
)
def test_solution_always_verifies(rewards, costs_seed, n_total, high_share):
    m = len(rewards)
    rng = np.random.default_rng(costs_seed)
    costs = rng.uniform(0.2, 4.0, m)
    flags = rng.random(m) < 0.5
    n_high = n_total * high_share
    # payoff-space residuals are ill-conditioned for sub-tolerance class
    # budgets (shares diverge like R / budget), so snap those to empty
    if n_high < 1e-3:
        n_high = 0.0
    elif n_total - n_high < 1e-3:
        n_high = n_total
    if n_high == 0.0:
        flags[:] = False
    cat = TaskCatalog((1.0,) * m, tuple(costs))
    pop = Population(n_total, n_high, 2.0, 1.0)
    mech = Mechanism(tuple(rewards), tuple(2.0 if f else 1.0 for f in flags))
    alloc = ne_solve(cat, pop, mech)
    report = verify_ne(cat, pop, mech, alloc)
    assert report.max_residual <= 1e-6
    assert sum(alloc.n_high_per_task) <= pop.n_high + 1e-6
    assert sum(alloc.n_low_per_task) <= pop.n_low + 1e-6


def test_determinism():
    cat = TaskCatalog((1.0, 1.0, 1.0), (2.0, 1.0, 3.0))
    mech = Mechanism((14.0, 8.0, 9.0), (1.0, 2.0, 1.0))
    pop = Population(25.0, 6.0, 2.0, 1.0)
    a = ne_solve(cat, pop, mech, SolverConfig(rng_seed=1))
    b = ne_solve(cat, pop, mech, SolverConfig(rng_seed=1))
    assert a == b
