import math

import pytest
from hypothesis import given, strategies as st

from chmech import (
    InvalidScenarioError,
    LogUtility,
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
    eligible_tasks,
    requester_profit,
    worker_payoff,
)


def test_catalog_validation():
    with pytest.raises(InvalidScenarioError):
        TaskCatalog((1.0,), (1.0, 2.0))
    with pytest.raises(InvalidScenarioError):
        TaskCatalog((), ())
    with pytest.raises(InvalidScenarioError):
        TaskCatalog((0.0,), (1.0,))
    with pytest.raises(InvalidScenarioError):
        TaskCatalog((1.0,), (-1.0,))
    cat = TaskCatalog((3, 4), (1, 2))
    assert cat.size == 2
    assert list(cat.task_ids) == [1, 2]
    assert cat.utilities == (3.0, 4.0)


def test_population_validation():
    with pytest.raises(InvalidScenarioError):
        Population(10.0, 11.0, 2.0, 1.0)
    with pytest.raises(InvalidScenarioError):
        Population(10.0, 2.0, 1.0, 1.0)  # needs a strict quality gap
    with pytest.raises(InvalidScenarioError):
        Population(-1.0, 0.0, 2.0, 1.0)
    pop = Population(10.0, 4.0, 2.0, 1.0)
    assert pop.n_low == 6.0


def test_mechanism_sets():
    pop = Population(10.0, 4.0, 2.0, 1.0)
    mech = Mechanism((5.0, 5.0, 5.0), (1.0, 2.0, 0.5))
    assert mech.high_set(pop) == frozenset({2})
    assert mech.low_set(pop) == frozenset({1, 3})
    with pytest.raises(InvalidScenarioError):
        mech.validate_for(TaskCatalog((1.0,), (1.0,)), pop)
    with pytest.raises(InvalidScenarioError):
        Mechanism((5.0, 5.0, 5.0), (1.0, 3.0, 0.5)).validate_for(
            TaskCatalog((1.0,) * 3, (1.0,) * 3), pop
        )


def test_eligible_tasks():
    mech = Mechanism((1.0, 1.0, 1.0), (1.0, 2.0, 1.0))
    assert eligible_tasks(1.0, mech) == frozenset({1, 3})
    assert eligible_tasks(2.0, mech) == frozenset({1, 2, 3})


def test_worker_payoff():
    cat = TaskCatalog((1.0, 1.0), (1.0, 2.0))
    mech = Mechanism((10.0, 6.0), (1.0, 2.0))
    assert worker_payoff(None, 0, cat, mech, 1.0) == 0.0
    assert worker_payoff(1, 5.0, cat, mech, 1.0) == pytest.approx(1.0)
    # ineligible selection burns the cost without a reward share
    assert worker_payoff(2, 3.0, cat, mech, 1.0) == pytest.approx(-2.0)
    with pytest.raises(InvalidScenarioError):
        worker_payoff(1, 0.5, cat, mech, 1.0)
    with pytest.raises(InvalidScenarioError):
        worker_payoff(3, 1.0, cat, mech, 1.0)


def test_requester_profit_log_family():
    cat = TaskCatalog((30.0, 12.0), (2.0, 1.0))
    util = LogUtility.from_catalog(cat)
    mech = Mechanism((4.0, 2.0), (1.0, 1.0))
    got = requester_profit(mech, (3.0, 1.0), util)
    want = 30.0 * math.log(4.0) + 12.0 * math.log(2.0) - 6.0
    assert got == pytest.approx(want)
    with pytest.raises(InvalidScenarioError):
        requester_profit(mech, (1.0,), util)
    with pytest.raises(InvalidScenarioError):
        requester_profit(mech, (-1.0, 0.0), util)


def test_log_utility_inverse():
    util = LogUtility((7.0, 2.0))
    for task in (1, 2):
        for x in (0.0, 0.3, 5.0):
            t = util.deriv(task, x)
            assert util.inv_deriv(task, t) == pytest.approx(x, abs=1e-12)


def test_solver_config_validation():
    with pytest.raises(InvalidScenarioError):
        SolverConfig(bisection_tol=0.0)
    with pytest.raises(InvalidScenarioError):
        SolverConfig(che_eps=1.5)
    with pytest.raises(InvalidScenarioError):
        SolverConfig(grasp_alpha=2.0)
    cfg = SolverConfig()
    assert cfg.grasp_iterations(5) == 100
    assert SolverConfig(grasp_max_iter=7).grasp_iterations(5) == 7
    assert cfg.level_cap_for(4.0) == 1000


@given(
    q=st.floats(0.1, 5.0),
    reqs=st.lists(st.floats(0.0, 5.0), min_size=1, max_size=6),
)
def test_eligibility_is_monotone_in_capability(q, reqs):
    mech = Mechanism((1.0,) * len(reqs), tuple(reqs))
    smaller = eligible_tasks(q, mech)
    larger = eligible_tasks(q + 1.0, mech)
    assert smaller <= larger
