"""Experiment runners that sweep the solvers and emit flat CSV tables.

Each runner is deterministic given its inputs and seed: sweep points may be
evaluated concurrently, but results are gathered and sorted before emission
so the output never depends on scheduling. Runners add no arithmetic of
their own; every emitted value is a direct solver output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .che import CheConfig, che_requester_search, che_run
from .mechopt import exhaustive_set_search, grasp_search, solve_fixed_set
from .model import (
    InvalidScenarioError,
    LogUtility,
    Mechanism,
    Population,
    SolverConfig,
    TaskCatalog,
)
from .ne import ne_solve

__all__ = [
    "ResultTable",
    "run_fig4",
    "run_fig5",
    "run_fig6",
    "run_convergence",
    "run_alg1_eval",
    "run_experiment",
    "EXPERIMENT_NAMES",
    "FIG3_ROW",
    "TABLE_ROWS",
]

# Default desk-scale study: three tasks with decreasing revenue coefficients.
DEFAULT_UTILITIES = (30.0, 12.0, 8.0)
DEFAULT_COSTS = (2.0, 1.0, 3.0)
DEFAULT_Q_HIGH = 2.0
DEFAULT_Q_LOW = 1.0


@dataclass(frozen=True)
class ResultTable:
    """Long-format result rows: (axis, series, value)."""

    rows: tuple[tuple[float | str, str, float], ...]

    @classmethod
    def build(cls, rows) -> "ResultTable":
        ordered = sorted(rows, key=lambda r: (_axis_key(r[0]), r[1]))
        return cls(tuple(ordered))

    def to_csv(self) -> str:
        lines = ["axis,series,value"]
        for axis, series, value in self.rows:
            lines.append(f"{_fmt(axis)},{series},{_fmt(value)}")
        return "\n".join(lines) + "\n"

    def series(self, name: str) -> list[tuple[float | str, float]]:
        return [(a, v) for a, s, v in self.rows if s == name]


def _axis_key(axis):
    if isinstance(axis, str):
        return (1, axis, 0.0)
    return (0, "", float(axis))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".12g")


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _default_catalog() -> TaskCatalog:
    return TaskCatalog(DEFAULT_UTILITIES, DEFAULT_COSTS)


def run_fig4(
    taus=(1.0, 1.5, 2.0),
    n_values=(10, 20, 30, 50, 90, 120, 200, 250),
    seed: int = 0,
    jobs: int = 1,
    catalog: TaskCatalog | None = None,
) -> ResultTable:
    """Optimal task-1 reward against population size, rational vs bounded."""
    catalog = catalog or _default_catalog()
    util = LogUtility.from_catalog(catalog)

    def point(item):
        n, tau = item
        pop = Population(float(n), 0.0, DEFAULT_Q_HIGH, DEFAULT_Q_LOW)
        cfg = SolverConfig(rng_seed=seed)
        if tau is None:
            sol = solve_fixed_set(catalog, pop, util, frozenset(), cfg)
            return (float(n), "fr_R1", catalog.costs[0] * sol.masses[0])
        mech, _, _ = che_requester_search(catalog, pop, util, CheConfig(tau=tau), cfg)
        return (float(n), f"che_R1_tau{tau:g}", mech.rewards[0])

    items = [(n, None) for n in n_values] + [
        (n, tau) for tau in taus for n in n_values
    ]
    return ResultTable.build(_map(point, items, jobs))


def run_fig5(
    nh_values=tuple(range(1, 21)),
    n_total: float = 20.0,
    tau: float = 1.5,
    seed: int = 0,
    jobs: int = 1,
    catalog: TaskCatalog | None = None,
) -> ResultTable:
    """Quality-requirement flags and task-1 reward against the high-class size."""
    catalog = catalog or _default_catalog()
    util = LogUtility.from_catalog(catalog)

    def point(nh):
        pop = Population(n_total, float(nh), DEFAULT_Q_HIGH, DEFAULT_Q_LOW)
        cfg = SolverConfig(rng_seed=seed)
        rows = []
        fr = exhaustive_set_search(catalog, pop, util, cfg)
        fr_high = {
            m
            for m in catalog.task_ids
            if fr.mechanism.quality_reqs[m - 1] > DEFAULT_Q_LOW
        }
        mech, _, _ = che_requester_search(catalog, pop, util, CheConfig(tau=tau), cfg)
        for m in catalog.task_ids:
            rows.append((float(nh), f"fr_high_flag_task{m}", 1.0 if m in fr_high else 0.0))
            rows.append(
                (
                    float(nh),
                    f"che_high_flag_task{m}",
                    1.0 if mech.quality_reqs[m - 1] > DEFAULT_Q_LOW else 0.0,
                )
            )
        rows.append((float(nh), "che_R1", mech.rewards[0]))
        return rows

    nested = _map(point, list(nh_values), jobs)
    return ResultTable.build([r for rows in nested for r in rows])


def run_fig6(
    n_values=tuple(range(25, 101, 5)),
    tau: float = 5.0,
    seed: int = 0,
    jobs: int = 1,
    catalog: TaskCatalog | None = None,
) -> ResultTable:
    """Same-mechanism worker counts and independently optimized profits vs N."""
    catalog = catalog or _default_catalog()
    util = LogUtility.from_catalog(catalog)

    def point(n):
        pop = Population(float(n), 0.0, DEFAULT_Q_HIGH, DEFAULT_Q_LOW)
        cfg = SolverConfig(rng_seed=seed)
        rows = []
        fr = exhaustive_set_search(catalog, pop, util, cfg)
        ne_alloc = ne_solve(catalog, pop, fr.mechanism, cfg)
        che_out = che_run(catalog, pop, fr.mechanism, CheConfig(tau=tau), cfg)
        for m in catalog.task_ids:
            rows.append((float(n), f"fr_N{m}", ne_alloc.totals[m - 1]))
            rows.append((float(n), f"che_N{m}", che_out.totals[m - 1]))
        rows.append((float(n), "fr_profit", fr.profit))
        _, _, br_profit = che_requester_search(catalog, pop, util, CheConfig(tau=tau), cfg)
        rows.append((float(n), "br_profit", br_profit))
        return rows

    nested = _map(point, list(n_values), jobs)
    return ResultTable.build([r for rows in nested for r in rows])


# Convergence-study rows: label, costs, rewards, high-requirement flags, N, N_H.
FIG3_ROW = {
    "label": "fig3",
    "costs": (1.0, 2.0, 1.5, 2.0),
    "rewards": (15.0, 20.0, 20.0, 30.0),
    "high_flags": (0, 1, 1, 0),
    "n_total": 100.0,
    "n_high": 30.0,
}

TABLE_ROWS = (
    {
        "label": "t1r1",
        "costs": (1.0, 2.0, 1.5, 2.0),
        "rewards": (5.0, 20.0, 15.0, 10.0),
        "high_flags": (1, 0, 0, 0),
        "n_total": 50.0,
        "n_high": 15.0,
    },
    {
        "label": "t1r2",
        "costs": (1.0, 2.0, 1.5, 2.0),
        "rewards": (12.0, 18.0, 15.0, 8.0),
        "high_flags": (1, 0, 0, 1),
        "n_total": 50.0,
        "n_high": 15.0,
    },
    {
        "label": "t1r3",
        "costs": (1.0, 2.0, 1.5, 2.0),
        "rewards": (20.0, 14.0, 17.0, 6.0),
        "high_flags": (0, 0, 1, 0),
        "n_total": 50.0,
        "n_high": 15.0,
    },
    {
        "label": "t2r1",
        "costs": (1.0, 2.0, 1.5, 2.0),
        "rewards": (50.0, 30.0, 15.0, 20.0),
        "high_flags": (1, 0, 0, 0),
        "n_total": 200.0,
        "n_high": 40.0,
    },
    {
        "label": "t2r2",
        "costs": (1.0, 2.0, 1.5, 2.0),
        "rewards": (42.0, 25.0, 15.0, 18.0),
        "high_flags": (1, 1, 0, 0),
        "n_total": 200.0,
        "n_high": 40.0,
    },
    {
        "label": "t2r3",
        "costs": (1.0, 2.0, 1.5, 2.0),
        "rewards": (26.0, 16.0, 32.0, 18.0),
        "high_flags": (1, 0, 0, 1),
        "n_total": 200.0,
        "n_high": 40.0,
    },
)


def convergence_gap(row: dict, tau: float, cfg: SolverConfig | None = None) -> float:
    """Max per-task gap between the bounded-rational and rational outcomes."""
    cfg = cfg or SolverConfig()
    costs = row["costs"]
    catalog = TaskCatalog((1.0,) * len(costs), costs)
    pop = Population(row["n_total"], row["n_high"], DEFAULT_Q_HIGH, DEFAULT_Q_LOW)
    quality = tuple(
        DEFAULT_Q_HIGH if f else DEFAULT_Q_LOW for f in row["high_flags"]
    )
    mech = Mechanism(row["rewards"], quality)
    ne_alloc = ne_solve(catalog, pop, mech, cfg)
    che_out = che_run(catalog, pop, mech, CheConfig(tau=tau), cfg)
    return max(
        abs(c - n) for c, n in zip(che_out.totals, ne_alloc.totals)
    )


def run_convergence(
    base_rows=None,
    taus=(5.0, 10.0, 20.0, 40.0, 80.0),
    seed: int = 0,
    jobs: int = 1,
) -> ResultTable:
    """Gap between the two equilibrium notions against the cognitive level."""
    rows = list(base_rows) if base_rows is not None else [FIG3_ROW, *TABLE_ROWS]

    def point(item):
        row, tau = item
        return (float(tau), row["label"], convergence_gap(row, tau, SolverConfig(rng_seed=seed)))

    items = [(row, tau) for row in rows for tau in taus]
    return ResultTable.build(_map(point, items, jobs))


def random_instance(m: int, seed: int) -> tuple[TaskCatalog, Population]:
    """Seeded random task set used by the heuristic-search evaluation."""
    import numpy as np

    rng = np.random.default_rng([seed, m])
    u = rng.uniform(1.0, 50.0, size=m)
    c = rng.uniform(0.5, 5.0, size=m)
    n_total = 3.0 * m
    n_high = float(m)
    catalog = TaskCatalog(tuple(u.tolist()), tuple(c.tolist()))
    return catalog, Population(n_total, n_high, DEFAULT_Q_HIGH, DEFAULT_Q_LOW)


def run_alg1_eval(
    m_values=(5, 10, 20),
    alphas=(0.2, 0.5, 0.8, 1.0),
    seeds=tuple(range(5)),
    max_iter_map=None,
    jobs: int = 1,
) -> ResultTable:
    """Mean greedy-randomized profit relative to the exhaustive optimum."""
    max_iter_map = max_iter_map or {5: 100, 10: 100, 20: 500}

    def point(item):
        m, alpha = item
        ratios = []
        for s in seeds:
            catalog, pop = random_instance(m, s)
            util = LogUtility.from_catalog(catalog)
            cfg = SolverConfig(rng_seed=s, grasp_alpha=alpha, grasp_max_iter=max_iter_map.get(m, 20 * m))
            exact = exhaustive_set_search(catalog, pop, util, cfg)
            approx = grasp_search(catalog, pop, util, cfg)
            ratios.append(approx.profit / exact.profit if exact.profit else 1.0)
        return (float(alpha), f"ratio_M{m}", sum(ratios) / len(ratios))

    items = [(m, a) for m in m_values for a in alphas]
    return ResultTable.build(_map(point, items, jobs))


EXPERIMENT_NAMES = (
    "fig4_reward_vs_N",
    "fig5_heterogeneous_vs_NH",
    "fig6_profit_vs_N",
    "fig3_convergence",
    "tables_1_2",
    "alg1_eval",
)


def run_experiment(name: str, seed: int = 0, jobs: int = 1) -> ResultTable:
    """Dispatch a named study with its embedded defaults."""
    if name == "fig4_reward_vs_N":
        return run_fig4(seed=seed, jobs=jobs)
    if name == "fig5_heterogeneous_vs_NH":
        return run_fig5(seed=seed, jobs=jobs)
    if name == "fig6_profit_vs_N":
        return run_fig6(seed=seed, jobs=jobs)
    if name == "fig3_convergence":
        return run_convergence(base_rows=[FIG3_ROW], seed=seed, jobs=jobs)
    if name == "tables_1_2":
        return run_convergence(base_rows=list(TABLE_ROWS), seed=seed, jobs=jobs)
    if name == "alg1_eval":
        return run_alg1_eval(m_values=(5, 10), seeds=tuple(range(3)), jobs=jobs)
    raise InvalidScenarioError(f"unknown experiment name: {name}")
