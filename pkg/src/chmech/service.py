"""HTTP facade over the solvers.

Every POST endpoint takes a scenario payload plus operation parameters and
returns both structured fields and a ready-to-write CSV string, so thin
clients can dump results without re-deriving the formatting. Error mapping:
structurally invalid input is 422, solver non-convergence is 409, and a
search-budget guard violation is 400.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .che import CheConfig, CheOutcome, che_requester_search, che_run
from .experiments import EXPERIMENT_NAMES, run_experiment
from .mechopt import exhaustive_set_search, grasp_search, solve_fixed_set
from .model import (
    GuardViolationError,
    InvalidScenarioError,
    SolverConvergenceError,
)
from .ne import ne_solve, verify_ne
from .oracles import integer_br_dynamics
from .scenario import Scenario

__all__ = ["app", "create_app"]


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _mass_csv(n_high, n_low) -> str:
    lines = ["task,n_high,n_low,n_total"]
    for i, (h, l) in enumerate(zip(n_high, n_low), start=1):
        lines.append(f"{i},{_fmt(h)},{_fmt(l)},{_fmt(h + l)}")
    return "\n".join(lines) + "\n"


class NeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    seed: int | None = None


class NeResponse(BaseModel):
    n_high: list[float]
    n_low: list[float]
    lambda_high: float
    lambda_low: float
    csv: str


class VerifyResponse(BaseModel):
    residuals: dict[str, float]
    max_residual: float
    csv: str


class OptRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    method: str = "exhaustive"
    alpha: float | None = None
    max_iter: int | None = None
    high_set: list[int] | None = None
    seed: int | None = None


class OptResponse(BaseModel):
    rewards: list[float]
    quality_reqs: list[float]
    masses: list[float]
    profit: float
    provenance: str
    csv: str


class CheRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    tau: float
    eps: float | None = None
    level_cap: int | None = None
    trace: bool = False
    optimize: bool = False
    seed: int | None = None


class CheResponse(BaseModel):
    n_high: list[float]
    n_low: list[float]
    tf_final: float
    levels: int
    converged: bool
    rewards: list[float] | None = None
    quality_reqs: list[float] | None = None
    profit: float | None = None
    csv: str


class OracleRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    seed: int | None = None
    max_rounds: int | None = None


class OracleResponse(BaseModel):
    choices: list[int]
    counts_high: list[int]
    counts_low: list[int]
    converged: bool
    rounds: int
    csv: str


class ExperimentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    seed: int = 0
    jobs: int = 1


class ExperimentResponse(BaseModel):
    name: str
    csv: str


def _trace_csv(outcome: CheOutcome) -> str:
    lines = ["level,f_k,tf,task,e_high,e_low,E_payoff"]
    for rec in outcome.trace:
        for i in range(len(rec.e_high)):
            lines.append(
                f"{rec.level},{_fmt(rec.f_k)},{_fmt(rec.tf)},{i + 1},"
                f"{_fmt(rec.e_high[i])},{_fmt(rec.e_low[i])},{_fmt(rec.payoffs[i])}"
            )
    return "\n".join(lines) + "\n"


def create_app() -> FastAPI:
    app = FastAPI(title="chmech", version="0.1.0")

    @app.exception_handler(InvalidScenarioError)
    async def _invalid(request: Request, exc: InvalidScenarioError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(SolverConvergenceError)
    async def _noconv(request: Request, exc: SolverConvergenceError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(GuardViolationError)
    async def _guard(request: Request, exc: GuardViolationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.post("/ne", response_model=NeResponse)
    async def ne(req: NeRequest):
        scn = req.scenario
        cfg = scn.solver_config(req.seed)
        alloc = ne_solve(scn.catalog(), scn.pop(), scn.mech(), cfg)
        return NeResponse(
            n_high=list(alloc.n_high_per_task),
            n_low=list(alloc.n_low_per_task),
            lambda_high=alloc.lambda_high,
            lambda_low=alloc.lambda_low,
            csv=_mass_csv(alloc.n_high_per_task, alloc.n_low_per_task),
        )

    @app.post("/ne/verify", response_model=VerifyResponse)
    async def ne_verify(req: NeRequest):
        scn = req.scenario
        cfg = scn.solver_config(req.seed)
        report = verify_ne(scn.catalog(), scn.pop(), scn.mech(), scn.alloc(), cfg)
        d = report.as_dict()
        lines = ["condition,residual"]
        for k in sorted(d):
            lines.append(f"{k},{_fmt(d[k])}")
        return VerifyResponse(
            residuals=d, max_residual=report.max_residual, csv="\n".join(lines) + "\n"
        )

    @app.post("/opt", response_model=OptResponse)
    async def opt(req: OptRequest):
        scn = req.scenario
        cfg = scn.solver_config(req.seed)
        if req.alpha is not None:
            from dataclasses import replace

            cfg = replace(cfg, grasp_alpha=req.alpha)
        if req.max_iter is not None:
            from dataclasses import replace

            cfg = replace(cfg, grasp_max_iter=req.max_iter)
        catalog, pop, util = scn.catalog(), scn.pop(), scn.utility()
        if req.method == "exhaustive":
            result = exhaustive_set_search(catalog, pop, util, cfg)
        elif req.method == "grasp":
            result = grasp_search(catalog, pop, util, cfg)
        elif req.method == "fixed-set":
            sol = solve_fixed_set(
                catalog, pop, util, frozenset(req.high_set or []), cfg
            )
            from .mechopt import mechanism_from_masses

            result = mechanism_from_masses(
                catalog, pop, sol.high_set, sol.masses, sol.profit, "fixed-set", util
            )
        else:
            raise InvalidScenarioError(f"unknown optimization method: {req.method}")
        mech = result.mechanism
        lines = ["task,reward,quality_req,mass"]
        for i in range(catalog.size):
            lines.append(
                f"{i + 1},{_fmt(mech.rewards[i])},{_fmt(mech.quality_reqs[i])},"
                f"{_fmt(result.masses[i])}"
            )
        return OptResponse(
            rewards=list(mech.rewards),
            quality_reqs=list(mech.quality_reqs),
            masses=list(result.masses),
            profit=result.profit,
            provenance=result.provenance,
            csv="\n".join(lines) + "\n",
        )

    @app.post("/che", response_model=CheResponse)
    async def che(req: CheRequest):
        scn = req.scenario
        cfg = scn.solver_config(req.seed)
        kwargs = {"tau": req.tau}
        if req.eps is not None:
            kwargs["eps"] = req.eps
        if req.level_cap is not None:
            kwargs["level_cap"] = req.level_cap
        try:
            che_cfg = CheConfig(**kwargs)
        except ValueError as exc:
            raise InvalidScenarioError(str(exc)) from exc
        catalog, pop = scn.catalog(), scn.pop()
        rewards = quality = profit = None
        if req.optimize:
            mech, outcome, profit = che_requester_search(
                catalog, pop, scn.utility(), che_cfg, cfg
            )
            rewards, quality = list(mech.rewards), list(mech.quality_reqs)
        else:
            outcome = che_run(catalog, pop, scn.mech(), che_cfg, cfg)
        if not outcome.converged:
            raise SolverConvergenceError(
                "level cascade hit its cap before covering 1 - eps of the population"
            )
        csv = (
            _trace_csv(outcome)
            if req.trace
            else _mass_csv(outcome.n_high_per_task, outcome.n_low_per_task)
        )
        return CheResponse(
            n_high=list(outcome.n_high_per_task),
            n_low=list(outcome.n_low_per_task),
            tf_final=outcome.tf_final,
            levels=len(outcome.trace),
            converged=outcome.converged,
            rewards=rewards,
            quality_reqs=quality,
            profit=profit,
            csv=csv,
        )

    @app.post("/oracle", response_model=OracleResponse)
    async def oracle(req: OracleRequest):
        scn = req.scenario
        cfg = scn.solver_config(req.seed)
        profile = integer_br_dynamics(
            scn.catalog(),
            scn.pop(),
            scn.mech(),
            max_rounds=req.max_rounds,
            seed=req.seed if req.seed is not None else cfg.rng_seed,
            cfg=cfg,
        )
        if not profile.converged:
            raise SolverConvergenceError(
                "best-response dynamics did not settle within the round budget"
            )
        lines = ["task,count_high,count_low,count_total"]
        for i, (h, l) in enumerate(
            zip(profile.counts_high, profile.counts_low), start=1
        ):
            lines.append(f"{i},{h},{l},{h + l}")
        return OracleResponse(
            choices=list(profile.choices),
            counts_high=list(profile.counts_high),
            counts_low=list(profile.counts_low),
            converged=profile.converged,
            rounds=profile.rounds,
            csv="\n".join(lines) + "\n",
        )

    @app.post("/experiment", response_model=ExperimentResponse)
    async def experiment(req: ExperimentRequest):
        if req.name not in EXPERIMENT_NAMES:
            raise InvalidScenarioError(
                f"unknown experiment {req.name!r}; choose from {', '.join(EXPERIMENT_NAMES)}"
            )
        table = run_experiment(req.name, seed=req.seed, jobs=req.jobs)
        return ExperimentResponse(name=req.name, csv=table.to_csv())

    return app


app = create_app()
