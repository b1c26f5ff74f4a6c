"""Command-line entry points.

Exit codes: 0 ok, 1 validation failure, 2 solver non-convergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config, validate
from .errors import EventflowError, LoadError, ValidationFailure
from .pipeline import PipelineError, export_run, run_pipeline

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NONCONVERGED = 2
EXIT_IO = 3


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to scenario config JSON")
    parser.add_argument("--force", action="store_true", help="recompute cached stages")
    parser.add_argument("--workers", type=int, default=None, help="solver worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check config and cross-file references")
    p.add_argument("--config", required=True)

    for name, help_text in (
        ("baseline", "solve the pre-event user equilibrium"),
        ("event-demand", "generate event demand additions"),
        ("metrics", "compute impact metrics for the configured scenario"),
        ("sweep", "run the configured lambda / top-k sweeps"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_arg(p)

    p = sub.add_parser("assign", help="solve the configured scenario assignment")
    _add_config_arg(p)
    p.add_argument(
        "--scenario", choices=["habit", "selfish", "altruism", "mixed"], default=None
    )
    p.add_argument("--lambda", dest="lam", type=float, default=None)

    p = sub.add_parser("strategy", help="plan and evaluate a mode-change reduction")
    _add_config_arg(p)
    p.add_argument("--mode", choices=["marginal", "uniform"], default=None)
    p.add_argument("--radius-km", type=float, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--fraction", type=float, default=None)

    p = sub.add_parser("export", help="write result tables for a completed run")
    p.add_argument("--config", default=None)
    p.add_argument("--run-dir", default=None)

    p = sub.add_parser("serve", help="run the scenario HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data", required=True, help="directory holding the base config.json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="static console bundle to serve at /")
    return parser


_UNTIL = {
    "baseline": "baseline",
    "event-demand": "event_demand",
    "assign": "metrics",
    "metrics": "metrics",
    "sweep": "sweep",
    "strategy": "strategy",
}


class _ConfigUnreadable(Exception):
    pass


def _load_config_or_exit(path: str):
    try:
        return load_config(path)
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise _ConfigUnreadable() from exc


def _convergence_exit(run_dir: Path) -> int:
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    flags = [entry["converged"] for entry in manifest.get("results", {}).values()]
    return EXIT_OK if all(flags) else EXIT_NONCONVERGED


def main(argv: list[str] | None = None) -> int:
    try:
        return _dispatch(build_parser().parse_args(argv))
    except _ConfigUnreadable:
        return EXIT_IO


def _dispatch(args) -> int:
    if args.command == "validate":
        config = _load_config_or_exit(args.config)
        report = validate(config)
        if report.ok:
            print("validation ok")
            return EXIT_OK
        for violation in report.violations:
            print(f"violation: {violation}")
        return EXIT_VALIDATION

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(Path(args.data), workers=args.workers, ui_dir=args.ui)
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return EXIT_OK

    if args.command == "export":
        if args.run_dir is None and args.config is None:
            print("error: export needs --run-dir or --config", file=sys.stderr)
            return EXIT_IO
        if args.run_dir is not None:
            run_dir = Path(args.run_dir)
        else:
            config = _load_config_or_exit(args.config)
            run_dir = Path(config.out_dir) / f"run-{config.content_hash()[:16]}"
        try:
            export_dir = export_run(run_dir)
        except EventflowError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"exported to {export_dir}")
        return EXIT_OK

    config = _load_config_or_exit(args.config)
    overrides = {}
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if args.command == "assign":
        if args.scenario is not None:
            overrides["scenario"] = args.scenario
        if args.lam is not None:
            overrides["lam"] = args.lam
    if args.command == "strategy":
        strategy = config.strategy
        if strategy is None:
            from .config import StrategySettings

            strategy = StrategySettings()
        updates = {}
        if args.mode is not None:
            updates["mode"] = args.mode
        if args.radius_km is not None:
            updates["radius_km"] = args.radius_km
        if args.top_k is not None:
            updates["top_k"] = args.top_k
        if args.fraction is not None:
            updates["reduction_fraction"] = args.fraction
        if updates:
            from dataclasses import replace

            strategy = replace(strategy, **updates)
        overrides["strategy"] = strategy
    if overrides:
        config = config.with_overrides(**overrides)

    try:
        run_dir = run_pipeline(config, force=args.force, until=_UNTIL[args.command])
    except PipelineError as exc:
        if isinstance(exc.cause, ValidationFailure):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        if isinstance(exc.cause, OSError) or isinstance(exc.cause, LoadError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"run complete: {run_dir}")
    return _convergence_exit(run_dir)


if __name__ == "__main__":
    sys.exit(main())
