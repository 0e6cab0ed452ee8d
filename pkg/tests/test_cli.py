"""CLI surface: run artifacts, exit codes, replay verification."""

from __future__ import annotations

import json
from pathlib import Path

from andorplan.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUN_FAILED, main

from conftest import DATA_DIR, RECIPE_TASK, SCENARIO_DIR

GOLDEN_TRAJECTORY = DATA_DIR / "golden_trajectory.jsonl"


def run_args(tmp_path, script="golden.script", extra=()) -> list[str]:
    return [
        "run",
        "--task",
        RECIPE_TASK,
        "--fixture",
        str(SCENARIO_DIR / "recipes_site.yaml"),
        "--script",
        str(SCENARIO_DIR / script),
        "--out",
        str(tmp_path / "out"),
        *extra,
    ]


class TestRun:
    def test_worked_example_exits_zero_and_matches_golden_file(self, tmp_path):
        code = main(run_args(tmp_path))
        assert code == EXIT_OK
        produced = (tmp_path / "out" / "trajectory.jsonl").read_bytes()
        assert produced == GOLDEN_TRAJECTORY.read_bytes()

    def test_artifacts_written(self, tmp_path):
        main(run_args(tmp_path))
        out = tmp_path / "out"
        result = json.loads((out / "result.json").read_text())
        assert result["outcome"] == "SUCCESS"
        assert (out / "final_response.txt").read_text().strip()
        snapshot = json.loads((out / "snapshot.json").read_text())
        assert snapshot["format"] == "plan-snapshot/1"

    def test_failed_run_exits_nonzero(self, tmp_path):
        code = main(run_args(tmp_path, script="failure.script"))
        assert code == EXIT_RUN_FAILED

    def test_budget_override_records_exhaustion(self, tmp_path):
        code = main(run_args(tmp_path, extra=("--budget", "1")))
        assert code == EXIT_RUN_FAILED
        result = json.loads((tmp_path / "out" / "result.json").read_text())
        assert result["outcome"] == "BUDGET_EXHAUSTED"

    def test_missing_script_is_config_error(self, tmp_path):
        args = run_args(tmp_path)
        idx = args.index("--script")
        del args[idx : idx + 2]
        assert main(args) == EXIT_CONFIG

    def test_missing_fixture_file_is_config_error(self, tmp_path):
        args = run_args(tmp_path)
        args[args.index("--fixture") + 1] = str(tmp_path / "nope.yaml")
        assert main(args) == EXIT_CONFIG

    def test_task_required(self, tmp_path):
        args = run_args(tmp_path)
        idx = args.index("--task")
        del args[idx : idx + 2]
        assert main(args) == EXIT_CONFIG

    def test_remote_mode_requires_endpoint(self, tmp_path):
        args = run_args(tmp_path, extra=("--controller", "remote"))
        assert main(args) == EXIT_CONFIG


class TestServeCommand:
    def test_serve_exposes_the_run_and_writes_artifacts(self, tmp_path):
        import json as jsonlib
        import socket
        import subprocess
        import sys
        import time
        import urllib.request

        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "andorplan.cli",
                "serve",
                *run_args(tmp_path)[1:],
                "--port",
                str(port),
                "--linger",
                "6",
            ],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
        )
        try:
            result = None
            deadline = time.monotonic() + 20
            while time.monotonic() < deadline:
                try:
                    with urllib.request.urlopen(
                        f"http://127.0.0.1:{port}/run/result", timeout=1
                    ) as response:
                        result = jsonlib.loads(response.read())
                        break
                except Exception:
                    time.sleep(0.2)
            assert result is not None, "service never reported a result"
            assert result["outcome"] == "SUCCESS"
        finally:
            proc.terminate()
            proc.wait(timeout=20)
        assert (tmp_path / "out" / "result.json").is_file()
        assert main(["replay", str(tmp_path / "out" / "trajectory.jsonl")]) == 0


class TestReplayCommand:
    def test_replay_of_cli_output_exits_zero(self, tmp_path):
        main(run_args(tmp_path))
        log = tmp_path / "out" / "trajectory.jsonl"
        assert main(["replay", str(log)]) == 0

    def test_replay_of_failure_log_exits_zero(self, tmp_path):
        main(run_args(tmp_path, script="failure.script"))
        log = tmp_path / "out" / "trajectory.jsonl"
        assert main(["replay", str(log)]) == 0

    def test_hand_edited_status_jump_detected(self, tmp_path):
        main(run_args(tmp_path))
        log = tmp_path / "out" / "trajectory.jsonl"
        doctored = []
        for line in log.read_text().strip().splitlines():
            record = json.loads(line)
            if record["event"] == "status_change" and record["new"] == "VISITED":
                record["old"] = "DELETED"
            doctored.append(json.dumps(record))
        log.write_text("\n".join(doctored) + "\n")
        assert main(["replay", str(log)]) == 1

    def test_truncated_log_reports_diagnostic(self, tmp_path):
        main(run_args(tmp_path))
        log = tmp_path / "out" / "trajectory.jsonl"
        text = log.read_text()
        log.write_text(text[: int(len(text) * 0.6)].rsplit("\n", 1)[0] + '\n{"seq"')
        assert main(["replay", str(log)]) == 2
