"""Command line client for the simulation service.

Subcommands validate / run / converge talk to the HTTP service; by default
an in-process instance is used (no server needed), `--server URL` targets a
running one.  `serve` starts the service.  Exit codes: 0 success,
1 validation failure, 2 configuration error, 3 run failure.

Set FROSTFLOW_THREADS to pin the linear-algebra thread count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _apply_thread_env():
    threads = os.environ.get("FROSTFLOW_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


class _InProcessClient:
    """Synchronous bridge into the in-process ASGI service."""

    def __init__(self, app):
        self._app = app

    def post(self, path, json=None):
        import asyncio

        import httpx

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                    transport=transport, base_url="http://frostflow.local",
                    timeout=None) as client:
                return await client.post(path, json=json)

        return asyncio.run(go())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=None)
    from .service.app import app
    return _InProcessClient(app)


def _load_config_dict(path: str):
    from .scenario import ScenarioError, load_config

    try:
        return load_config(path).to_dict(), None
    except FileNotFoundError:
        return None, f"config file not found: {path}"
    except ScenarioError as exc:
        return None, str(exc)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_validate(args) -> int:
    config, err = _load_config_dict(args.config)
    if err:
        return _fail(err, 2)
    with _client(args.server) as client:
        resp = client.post("/validate", json={"config": config,
                                              "seed": args.seed})
    if resp.status_code != 200:
        return _fail(resp.json().get("detail", resp.text), 2)
    body = resp.json()
    head = ("all admissibility clauses hold" if body["passed"]
            else "admissibility violated")
    print(head)
    for clause in body["clauses"]:
        status = "pass" if clause["passed"] else "FAIL"
        extra = f" [{clause['witness']}]" if clause["witness"] else ""
        print(f"  {clause['name']:<8} {status}  {clause['detail']}{extra}")
    return 0 if body["passed"] else 1


def cmd_run(args) -> int:
    config, err = _load_config_dict(args.config)
    if err:
        return _fail(err, 2)
    payload = {"config": config, "out_dir": args.out_dir, "seed": args.seed,
               "force": args.force}
    with _client(args.server) as client:
        resp = client.post("/run", json=payload)
    if resp.status_code != 200:
        return _fail(resp.json().get("detail", resp.text), 2)
    body = resp.json()
    status = body["status"]
    print(f"run {body['summary'].get('name', '?')}: {status}")
    print(f"outputs in {body['out_dir']}")
    if status == "completed":
        inv = body["summary"].get("invariants", {})
        print(f"  steps {inv.get('steps')}  chi in "
              f"[{inv.get('chi_min')}, {inv.get('chi_max')}]  "
              f"min theta {inv.get('theta_min')}")
        return 0
    if status == "validation_failed":
        print("validation failed; rerun with --force to override",
              file=sys.stderr)
        return 1
    print(body["summary"].get("failure", "run failed"), file=sys.stderr)
    return 3


def cmd_converge(args) -> int:
    config, err = _load_config_dict(args.config)
    if err:
        return _fail(err, 2)
    payload = {"config": config, "levels": args.levels, "seed": args.seed,
               "out_dir": args.out_dir}
    with _client(args.server) as client:
        resp = client.post("/converge", json=payload)
    if resp.status_code != 200:
        return _fail(resp.json().get("detail", resp.text), 2)
    report = resp.json()["report"]
    failed = [lv for lv in report["levels"] if lv["failed"]]
    print(f"convergence study over {len(report['levels'])} levels")
    for lv in report["levels"]:
        mark = "FAILED" if lv["failed"] else "ok"
        extra = "" if lv["failed"] else \
            f"  defect {lv['ledger_defect']:.6e}"
        print(f"  level {lv['level']}  dt {lv['dt']:.6g}  {mark}{extra}")
    for key, ratios in report.get("cauchy_ratios", {}).items():
        shown = ", ".join("exact" if r is None else f"{r:.3f}"
                          for r in ratios)
        print(f"  {key}: shrink factors per halving {shown}")
    if "defect_orders" in report:
        print("  ledger-defect orders: "
              + ", ".join(f"{o:.3f}" for o in report["defect_orders"]))
    return 3 if failed else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frostflow",
        description="Freeze-thaw porous-media simulation service client")
    parser.add_argument("--server", default=None,
                        help="service URL; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check admissibility clauses")
    p.add_argument("--config", required=True,
                   help="config path or preset:<name>")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("run", help="run a scenario and write outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true",
                   help="run even if validation fails")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("converge", help="dt-refinement study")
    p.add_argument("--config", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
