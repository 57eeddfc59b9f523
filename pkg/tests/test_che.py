import math

import pytest
from hypothesis import given, settings, strategies as st

from chmech import (
    CheConfig,
    GuardViolationError,
    LogUtility,
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
    che_requester_search,
    che_run,
    ne_solve,
    poisson_pmf,
)

CAT4 = TaskCatalog((1.0,) * 4, (1.0, 2.0, 1.5, 2.0))
POP_HET = Population(50.0, 15.0, 2.0, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        CheConfig(tau=0.0)
    with pytest.raises(ValueError):
        CheConfig(tau=5.0, eps=0.0)
    with pytest.raises(ValueError):
        CheConfig(tau=5.0, level_cap=0)


def test_poisson_pmf_basics():
    assert poisson_pmf(0, 2.0) == pytest.approx(math.exp(-2.0))
    assert poisson_pmf(3, 2.0) == pytest.approx(8.0 / 6.0 * math.exp(-2.0))
    # log-space branch agrees with the direct one at the boundary
    assert poisson_pmf(21, 20.0) == pytest.approx(
        20.0**21 * math.exp(-20.0) / math.factorial(21), rel=1e-12
    )
    assert sum(poisson_pmf(k, 7.5) for k in range(200)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        poisson_pmf(-1, 2.0)
    with pytest.raises(ValueError):
        poisson_pmf(2, 0.0)


def test_level_zero_is_uniform():
    mech = Mechanism((5.0, 20.0, 15.0, 10.0), (2.0, 1.0, 1.0, 1.0))
    out = che_run(CAT4, POP_HET, mech, CheConfig(tau=2.0))
    first = out.trace[0]
    assert first.e_high == (0.25, 0.25, 0.25, 0.25)
    # low workers split over the three low-requirement tasks only
    assert first.e_low == (0.0, 1 / 3, 1 / 3, 1 / 3)


def test_masses_account_for_covered_population():
    mech = Mechanism((5.0, 20.0, 15.0, 10.0), (2.0, 1.0, 1.0, 1.0))
    out = che_run(CAT4, POP_HET, mech, CheConfig(tau=3.0))
    assert out.converged
    assert out.tf_final > 1.0 - 1e-3
    assert sum(out.n_high_per_task) <= POP_HET.n_high * out.tf_final + 1e-9
    assert sum(out.n_low_per_task) <= POP_HET.n_low * out.tf_final + 1e-9


def test_unprofitable_tasks_are_never_chosen():
    mech = Mechanism((0.5, 20.0, 15.0, 1.0), (1.0, 1.0, 1.0, 1.0))
    out = che_run(CAT4, POP_HET, mech, CheConfig(tau=3.0))
    assert out.totals[0] == 0.0  # reward below cost
    assert out.totals[3] == 0.0


def test_level_cap_reports_non_convergence():
    mech = Mechanism((5.0, 20.0, 15.0, 10.0), (1.0, 1.0, 1.0, 1.0))
    out = che_run(CAT4, POP_HET, mech, CheConfig(tau=5.0, level_cap=2))
    assert not out.converged
    assert len(out.trace) == 2


def test_high_tau_approaches_equilibrium():
    mech = Mechanism((15.0, 20.0, 20.0, 30.0), (1.0,) * 4)
    pop = Population(100.0, 0.0, 2.0, 1.0)
    ne_totals = ne_solve(CAT4, pop, mech).totals
    out = che_run(CAT4, pop, mech, CheConfig(tau=200.0))
    gap = max(abs(a - b) for a, b in zip(out.totals, ne_totals))
    assert gap < 0.5


def test_search_close_to_rational_optimum_at_moderate_tau():
    # With tau = 5 and a small population the searched bounded-rational
    # profit stays within a few percent of the rational benchmark.
    catalog = TaskCatalog((30.0, 12.0, 8.0), (2.0, 1.0, 3.0))
    util = LogUtility.from_catalog(catalog)
    pop = Population(10.0, 0.0, 2.0, 1.0)
    from chmech import exhaustive_set_search

    fr = exhaustive_set_search(catalog, pop, util)
    _, _, br_profit = che_requester_search(catalog, pop, util, CheConfig(tau=5.0))
    assert abs(br_profit - fr.profit) <= 0.03 * fr.profit


def test_search_task_guard():
    m = 7
    cat = TaskCatalog((1.0,) * m, (1.0,) * m)
    pop = Population(10.0, 0.0, 2.0, 1.0)
    with pytest.raises(GuardViolationError):
        che_requester_search(
            cat, pop, LogUtility.from_catalog(cat), CheConfig(tau=2.0)
        )


def test_search_deterministic():
    catalog = TaskCatalog((30.0, 12.0, 8.0), (2.0, 1.0, 3.0))
    util = LogUtility.from_catalog(catalog)
    pop = Population(20.0, 4.0, 2.0, 1.0)
    cfg = SolverConfig(rng_seed=5)
    a = che_requester_search(catalog, pop, util, CheConfig(tau=1.5), cfg)
    b = che_requester_search(catalog, pop, util, CheConfig(tau=1.5), cfg)
    assert a == b


@settings(max_examples=25, deadline=None)
@given(
    tau=st.floats(0.5, 30.0),
    r1=st.floats(2.0, 40.0),
    r2=st.floats(2.0, 40.0),
)
def test_fractions_are_distributions(tau, r1, r2):
    cat = TaskCatalog((1.0, 1.0), (1.0, 2.0))
    pop = Population(30.0, 10.0, 2.0, 1.0)
    mech = Mechanism((r1, r2), (2.0, 1.0))
    out = che_run(cat, pop, mech, CheConfig(tau=tau))
    for rec in out.trace:
        assert all(0.0 <= e <= 1.0 for e in rec.e_high + rec.e_low)
        assert sum(rec.e_high) <= 1.0 + 1e-12
        assert sum(rec.e_low) <= 1.0 + 1e-12
