"""Operator entry points: run a task, replay a log, serve a live run."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .controller.remote import RemoteLLMController
from .controller.scripted import ControllerScript, ScriptedController, ScriptError
from .engine import Engine, EngineConfig, RunOutcome
from .environment import FixtureError, SimulatedBrowser, SiteFixture
from .replay import verify_log_file
from .session import RunSession
from .trajectory import TrajectoryLog

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="andorplan")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a task and write run artifacts")
    _add_run_arguments(run)
    run.add_argument("--serve", action="store_true", help="expose the live run over HTTP")

    serve = sub.add_parser("serve", help="execute a task with the HTTP service attached")
    _add_run_arguments(serve)

    replay = sub.add_parser("replay", help="verify a trajectory log")
    replay.add_argument("log", help="path to trajectory.jsonl")

    return parser


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--task", help="task description text")
    parser.add_argument("--task-file", help="file containing the task description")
    parser.add_argument("--fixture", required=True, help="site fixture YAML path")
    parser.add_argument(
        "--controller", choices=("scripted", "remote"), default="scripted"
    )
    parser.add_argument("--script", help="controller script path (scripted mode)")
    parser.add_argument(
        "--default-mode",
        choices=("noop", "fail"),
        default="noop",
        help="scripted controller behaviour on fixture misses",
    )
    parser.add_argument("--endpoint", help="chat-completions base URL (remote mode)")
    parser.add_argument("--model", help="model name (remote mode)")
    parser.add_argument(
        "--auth-env",
        default="ANDORPLAN_API_KEY",
        help="environment variable holding the API token (remote mode)",
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--budget", type=int)
    parser.add_argument("--max-steps", type=int)
    parser.add_argument("--max-retry-count", type=int)
    parser.add_argument("--max-revision-count", type=int)
    parser.add_argument("--max-children", type=int)
    parser.add_argument(
        "--completion-check-all",
        action="store_true",
        help="run the completion check on every AND node, not only the root",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument(
        "--pause-at",
        type=int,
        help="pause the run once this many loop iterations complete (0 = before the first)",
    )
    parser.add_argument(
        "--linger",
        type=float,
        help="keep serving this many seconds after the run finishes (default: until Ctrl-C)",
    )
    parser.add_argument(
        "--console",
        help="directory with the built operator console (serves it at /console)",
    )


def _load_task(args) -> str:
    if args.task and args.task_file:
        raise ConfigError("give either --task or --task-file, not both")
    if args.task:
        return args.task
    if args.task_file:
        path = Path(args.task_file)
        if not path.is_file():
            raise ConfigError(f"task file not found: {path}")
        return path.read_text(encoding="utf-8").strip()
    raise ConfigError("a task is required (--task or --task-file)")


def _engine_config(args) -> EngineConfig:
    config = EngineConfig()
    overrides = {
        "budget": args.budget,
        "max_steps": args.max_steps,
        "max_retry_count": args.max_retry_count,
        "max_revision_count": args.max_revision_count,
        "max_children": args.max_children,
    }
    values = config.as_dict()
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.completion_check_all:
        values["completion_check_root_only"] = False
    try:
        return EngineConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_engine(args, log: TrajectoryLog) -> Engine:
    task = _load_task(args)
    try:
        fixture = SiteFixture.from_file(args.fixture)
    except (OSError, FixtureError) as exc:
        raise ConfigError(f"fixture: {exc}") from None
    environment = SimulatedBrowser(fixture)

    if args.controller == "scripted":
        if not args.script:
            raise ConfigError("scripted mode requires --script")
        try:
            script = ControllerScript.from_file(args.script)
        except (OSError, ScriptError) as exc:
            raise ConfigError(f"script: {exc}") from None
        controller = ScriptedController(script, default_mode=args.default_mode)
    else:
        if not args.endpoint or not args.model:
            raise ConfigError("remote mode requires --endpoint and --model")
        controller = RemoteLLMController(
            base_url=args.endpoint,
            model=args.model,
            api_key_env=args.auth_env,
            trace=lambda **payload: log.emit("controller", **payload),
        )
    return Engine(task, controller, environment, config=_engine_config(args), log=log)


def _write_artifacts(out_dir: Path, engine: Engine, result) -> None:
    (out_dir / "snapshot.json").write_text(
        json.dumps(engine.build_snapshot(), indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "final_response.txt").write_text(
        result.final_response + "\n", encoding="utf-8"
    )
    (out_dir / "result.json").write_text(
        json.dumps(result.as_dict(), indent=2) + "\n", encoding="utf-8"
    )


def cmd_run(args, serve: bool = False) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "trajectory.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_stream:
        log = TrajectoryLog(stream=log_stream)
        engine = _build_engine(args, log)
        if serve:
            # Artifacts land the moment the run finishes, before the service
            # lingers, so killing the server never loses them.
            result = _serve_run(
                args, engine, on_result=lambda r: _write_artifacts(out_dir, engine, r)
            )
        else:
            result = engine.run()
            _write_artifacts(out_dir, engine, result)
    print(f"outcome: {result.outcome.value}")
    print(f"artifacts: {out_dir}")
    return EXIT_OK if result.outcome is RunOutcome.SUCCESS else EXIT_RUN_FAILED


def _serve_run(args, engine: Engine, on_result=None):
    import threading
    import time

    import uvicorn

    from .service import create_app

    if args.pause_at is not None:
        engine.schedule_pause(args.pause_at)
    session = RunSession(engine)
    app = create_app(session, console_dir=args.console)
    server = uvicorn.Server(
        uvicorn.Config(app, host=args.host, port=args.port, log_level="warning")
    )
    server_thread = threading.Thread(target=server.run, name="andorplan-service")
    server_thread.start()
    print(f"serving run on http://{args.host}:{args.port}")
    try:
        session.start()
        result = None
        while result is None:
            result = session.wait(timeout=0.2)
        if on_result is not None:
            on_result(result)
        print(f"run finished: {result.outcome.value}; service still up for inspection")
        if args.linger is None:
            while True:
                time.sleep(0.5)
        else:
            time.sleep(args.linger)
    except KeyboardInterrupt:
        session.abort()
        result = session.result
    finally:
        server.should_exit = True
        server_thread.join()
    if result is None:
        raise RuntimeError("engine thread ended without a result")
    return result


def cmd_replay(args) -> int:
    code, message = verify_log_file(args.log)
    print(message)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, serve=args.serve)
        if args.command == "serve":
            return cmd_run(args, serve=True)
        if args.command == "replay":
            return cmd_replay(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
