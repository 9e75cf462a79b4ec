"""Command-line entry points: simulate, serve, check.

simulate runs a scenario headless (scripted operator or a recorded
skeleton log) and writes the .tlog, the consumed .skel frames, and a
metrics CSV. serve hosts the REST/WebSocket service with the live loop.
check validates a model and runs the dynamics self-check suite.

Exit codes: 0 success, 1 error, 2 task failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .diagnostics import check_model_source
from .model import ModelError, load_model
from .protocol import write_log
from .scenario import (
    ReplaySource,
    ScenarioError,
    load_scenario,
    run_scenario,
    write_metrics_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TASK_FAILED = 2

log = logging.getLogger("telemanip")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telemanip",
        description="Teleoperated quadruped-manipulator stack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario headless and write logs")
    sim.add_argument("--model", default="default", help="model JSON path or 'default'")
    sim.add_argument(
        "--scenario", required=True, help="scenario JSON path or bundled name"
    )
    sim.add_argument(
        "--input",
        default="scripted",
        help="'scripted' or a recorded .skel/.tlog skeleton log to replay",
    )
    sim.add_argument("--out", default="runs", help="output directory for artifacts")
    sim.add_argument("--duration", type=float, default=None, help="override duration [s]")
    sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    sim.add_argument("--json", action="store_true", help="machine-readable summary")
    sim.set_defaults(func=cmd_simulate)

    srv = sub.add_parser("serve", help="host the console service and live loop")
    srv.add_argument("--model", default="default", help="model JSON path or 'default'")
    srv.add_argument("--scenario", default=None, help="scene for the live loop")
    srv.add_argument("--port", type=int, default=7447, help="framed TCP port")
    srv.add_argument("--ws-port", type=int, default=7448, help="HTTP/WebSocket port")
    srv.add_argument("--out", default=None, help="write the live state log here")
    srv.set_defaults(func=cmd_serve)

    chk = sub.add_parser("check", help="validate a model and self-check dynamics")
    chk.add_argument("--model", default="default", help="model JSON path or 'default'")
    chk.add_argument("--seed", type=int, default=0, help="seed for the random probes")
    chk.add_argument("--json", action="store_true", help="machine-readable report")
    chk.set_defaults(func=cmd_check)

    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
        overrides = {}
        if args.duration is not None:
            overrides["duration"] = args.duration
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            scenario = dataclasses.replace(scenario, **overrides)
        model = load_model(args.model)
        if args.input == "live":
            raise ScenarioError("live input needs the serve command")
        source = None
        if args.input != "scripted":
            source = ReplaySource.from_file(args.input)
    except (ScenarioError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    log.info("running scenario %s (%s) for %.1fs", scenario.name, scenario.task, scenario.duration)
    sim_log, metrics, frames = run_scenario(scenario, model=model, source=source)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"{scenario.name}.tlog"
    skel_path = out_dir / f"{scenario.name}.skel"
    csv_path = out_dir / f"{scenario.name}_metrics.csv"
    sim_log.write(log_path)
    write_log(skel_path, frames)
    write_metrics_csv(csv_path, scenario, metrics)

    if args.json:
        print(
            json.dumps(
                {
                    "scenario": scenario.name,
                    "task": scenario.task,
                    "completion": metrics.completion,
                    "completion_time_s": metrics.completion_time,
                    "final_ee_error_m": metrics.final_ee_error,
                    "violations": metrics.violations,
                    "states": len(sim_log.states),
                    "events": [[t, name] for t, name in sim_log.events],
                    "log": str(log_path),
                    "input_log": str(skel_path),
                    "metrics_csv": str(csv_path),
                }
            )
        )
    else:
        when = "-" if metrics.completion_time is None else f"{metrics.completion_time:.2f}s"
        print(
            f"scenario {scenario.name} ({scenario.task}): "
            f"completion={metrics.completion} at {when}, "
            f"ee_error={metrics.final_ee_error:.4f}m, violations={metrics.violations}"
        )
        print(f"wrote {log_path} ({len(sim_log.states)} states), {skel_path}, {csv_path}")
    return EXIT_OK if metrics.completion else EXIT_TASK_FAILED


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        load_model(args.model)
        if args.scenario is not None:
            load_scenario(args.scenario)
    except (ScenarioError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    console = Path.cwd() / "frontend" / "dist"
    config = ServiceConfig(
        model_source=args.model,
        scenario=args.scenario,
        tcp_port=args.port,
        live=True,
        log_path=args.out,
        console_dir=str(console) if console.is_dir() else None,
    )
    app = create_app(config)
    level = os.environ.get("TELEMANIP_LOG", "info").lower()
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=args.ws_port, log_level=level)
    )
    log.info("serving HTTP/WS on %d, framed TCP on %d", args.ws_port, args.port)
    try:
        server.run()
    except (SystemExit, KeyboardInterrupt):
        pass
    # covers both HTTP bind conflicts and TCP session startup failures
    return EXIT_OK if server.started else EXIT_ERROR


def cmd_check(args: argparse.Namespace) -> int:
    report = check_model_source(args.model, seed=args.seed)
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        for check in report.checks:
            flag = "PASS" if check.passed else "FAIL"
            print(f"{flag}  {check.name}: {check.detail}")
        print(f"{'all checks passed' if report.passed else 'CHECKS FAILED'} ({report.model_name})")
    return EXIT_OK if report.passed else EXIT_ERROR


def main(argv=None) -> int:
    level = os.environ.get("TELEMANIP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
