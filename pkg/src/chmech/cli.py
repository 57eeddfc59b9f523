"""Command-line client for the solver service.

The CLI never computes anything itself: it builds a request, posts it to
the HTTP service (an in-process instance by default, a remote one with
--server), and writes the returned CSV verbatim. That keeps command output
byte-identical to service output for the same inputs.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence,
4 search-budget guard violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import httpx

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3
EXIT_GUARD = 4

_STATUS_TO_EXIT = {422: EXIT_INVALID, 409: EXIT_NO_CONVERGENCE, 400: EXIT_GUARD}


def _add_global_flags(p) -> None:
    # SUPPRESS keeps a value given before the subcommand from being
    # clobbered by the subparser's default.
    p.add_argument(
        "--server",
        default=argparse.SUPPRESS,
        help="base URL of a running service; default runs in-process",
    )
    p.add_argument(
        "--seed",
        type=int,
        default=argparse.SUPPRESS,
        help="RNG seed; falls back to $CHMECH_SEED, then 0",
    )
    p.add_argument(
        "--out", default=argparse.SUPPRESS, help="write the CSV here instead of stdout"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chmech",
        description="crowdsourcing mechanism and equilibrium toolkit",
    )
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario(p):
        _add_global_flags(p)
        p.add_argument("--scenario", required=True, help="path to a scenario JSON file")

    p_ne = sub.add_parser("ne", help="continuum equilibrium for a posted mechanism")
    add_scenario(p_ne)
    p_ne.add_argument(
        "--verify",
        action="store_true",
        help="check the scenario's candidate allocation instead of solving",
    )

    p_opt = sub.add_parser("opt", help="requester-optimal mechanism, rational workers")
    add_scenario(p_opt)
    p_opt.add_argument(
        "--method", choices=("exhaustive", "grasp", "fixed-set"), default="exhaustive"
    )
    p_opt.add_argument("--alpha", type=float, default=None, help="greedy-randomized threshold parameter")
    p_opt.add_argument("--max-iter", type=int, default=None, help="restart budget for the randomized search")
    p_opt.add_argument(
        "--high-set",
        default=None,
        help="comma-separated task ids for --method fixed-set, e.g. 1,3",
    )

    p_che = sub.add_parser("che", help="bounded-rational cascade for a posted mechanism")
    add_scenario(p_che)
    p_che.add_argument("--tau", type=float, required=True, help="mean cognitive level")
    p_che.add_argument("--eps", type=float, default=None, help="cascade truncation mass")
    p_che.add_argument("--level-cap", type=int, default=None)
    p_che.add_argument("--trace", action="store_true", help="emit the per-level trace CSV")
    p_che.add_argument(
        "--optimize",
        action="store_true",
        help="search the requester's best mechanism instead of using the posted one",
    )

    p_orc = sub.add_parser("oracle", help="integer best-response dynamics cross-check")
    add_scenario(p_orc)
    p_orc.add_argument("--max-rounds", type=int, default=None)

    p_exp = sub.add_parser("experiment", help="run a named sweep study")
    _add_global_flags(p_exp)
    p_exp.add_argument("--name", required=True)
    p_exp.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")

    return parser


def _resolve_seed(args) -> int | None:
    seed = getattr(args, "seed", None)
    if seed is not None:
        return seed
    env = os.environ.get("CHMECH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise SystemExit(EXIT_INVALID) from exc
    return None


def _load_scenario_dict(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID) from exc
    if not isinstance(data, dict):
        print("error: scenario JSON must be an object", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)
    return data


def _request(args, path: str, payload: dict) -> dict:
    server = getattr(args, "server", None)
    if server:
        client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    else:
        from fastapi.testclient import TestClient

        from .service import app

        client = TestClient(app)
    with client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error ({resp.status_code}): {detail}", file=sys.stderr)
        raise SystemExit(_STATUS_TO_EXIT.get(resp.status_code, EXIT_INVALID))
    return resp.json()


def _emit(args, body: dict) -> None:
    csv = body["csv"]
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed = _resolve_seed(args)

    if args.command == "experiment":
        body = _request(
            args,
            "/experiment",
            {"name": args.name, "seed": seed if seed is not None else 0, "jobs": args.jobs},
        )
        _emit(args, body)
        return EXIT_OK

    scenario = _load_scenario_dict(args.scenario)

    if args.command == "ne":
        path = "/ne/verify" if args.verify else "/ne"
        body = _request(args, path, {"scenario": scenario, "seed": seed})
        _emit(args, body)
        if args.verify:
            print(f"max_residual={body['max_residual']:.6g}", file=sys.stderr)
        return EXIT_OK

    if args.command == "opt":
        payload = {
            "scenario": scenario,
            "method": args.method,
            "alpha": args.alpha,
            "max_iter": args.max_iter,
            "seed": seed,
        }
        if args.high_set is not None:
            try:
                payload["high_set"] = [int(x) for x in args.high_set.split(",") if x]
            except ValueError as exc:
                print("error: --high-set expects comma-separated integers", file=sys.stderr)
                raise SystemExit(EXIT_INVALID) from exc
        body = _request(args, "/opt", payload)
        _emit(args, body)
        print(f"profit={body['profit']:.6g} ({body['provenance']})", file=sys.stderr)
        return EXIT_OK

    if args.command == "che":
        body = _request(
            args,
            "/che",
            {
                "scenario": scenario,
                "tau": args.tau,
                "eps": args.eps,
                "level_cap": args.level_cap,
                "trace": args.trace,
                "optimize": args.optimize,
                "seed": seed,
            },
        )
        _emit(args, body)
        if args.optimize:
            print(f"profit={body['profit']:.6g}", file=sys.stderr)
        return EXIT_OK

    if args.command == "oracle":
        body = _request(
            args,
            "/oracle",
            {"scenario": scenario, "seed": seed, "max_rounds": args.max_rounds},
        )
        _emit(args, body)
        print(f"rounds={body['rounds']}", file=sys.stderr)
        return EXIT_OK

    raise SystemExit(EXIT_INVALID)


if __name__ == "__main__":
    raise SystemExit(main())
