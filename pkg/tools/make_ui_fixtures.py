"""Regenerate frontend test fixtures from real engine/service output.

Run from the repo root: python3 tools/make_ui_fixtures.py
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "tests"))

from fastapi.testclient import TestClient

from andorplan.service import create_app
from andorplan.session import RunSession
from conftest import build_scenario_engine

OUT = Path(__file__).parent.parent / "frontend" / "tests" / "fixtures"

INJECTED = [
    "Verify the recipe is vegan",
    "Verify the rating threshold",
    "Record the source link",
]


def write(name: str, payload: dict) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / name).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {name}")


def golden_final() -> None:
    engine = build_scenario_engine("golden.script")
    session = RunSession(engine)
    client = TestClient(create_app(session))
    session.start()
    session.wait(timeout=10)
    write("golden_final_snapshot.json", client.get("/run/snapshot").json())
    write("golden_result.json", client.get("/run/result").json())
    events = client.get("/run/events", params={"after": 0}).json()
    write("golden_events.json", events)


def failure_final() -> None:
    engine = build_scenario_engine("failure.script")
    session = RunSession(engine)
    client = TestClient(create_app(session))
    session.start()
    session.wait(timeout=10)
    write("failure_final_snapshot.json", client.get("/run/snapshot").json())


def intervention_pair() -> None:
    engine = build_scenario_engine("intervention.script")
    engine.schedule_pause(1)
    session = RunSession(engine)
    client = TestClient(create_app(session))
    session.start()
    deadline = time.monotonic() + 5
    while session.state != "paused" and time.monotonic() < deadline:
        time.sleep(0.01)
    assert session.state == "paused"
    write("paused_snapshot.json", client.get("/run/snapshot").json())
    ack = client.post(
        "/run/interventions",
        json={"kind": "inject_children", "node_id": "1", "descriptions": INJECTED},
    ).json()
    assert ack["accepted"], ack
    write("injected_ack.json", ack)
    write("injected_snapshot.json", client.get("/run/snapshot").json())
    client.post("/run/interventions", json={"kind": "resume"})
    session.wait(timeout=10)


if __name__ == "__main__":
    golden_final()
    failure_final()
    intervention_pair()
