from __future__ import annotations

from pathlib import Path

import pytest

from andorplan.controller.scripted import ControllerScript, ScriptedController
from andorplan.engine import Engine, EngineConfig
from andorplan.environment import SimulatedBrowser, SiteFixture
from andorplan.trajectory import TrajectoryLog

DATA_DIR = Path(__file__).parent / "data"
SCENARIO_DIR = DATA_DIR / "scenarios"
DIRECTIVE_DIR = DATA_DIR / "directives"

RECIPE_TASK = "Find a vegan chocolate brownie recipe with a 4+ rating"


def build_scenario_engine(
    script_name: str,
    config: EngineConfig | None = None,
    log: TrajectoryLog | None = None,
    default_mode: str = "noop",
) -> Engine:
    fixture = SiteFixture.from_file(str(SCENARIO_DIR / "recipes_site.yaml"))
    script = ControllerScript.from_file(str(SCENARIO_DIR / script_name))
    return Engine(
        RECIPE_TASK,
        ScriptedController(script, default_mode=default_mode),
        SimulatedBrowser(fixture),
        config=config or EngineConfig(),
        log=log,
    )


def pops(engine: Engine) -> list[tuple[str, str]]:
    return [
        (r["node"], r["state"]) for r in engine.log.records if r["event"] == "pop"
    ]


@pytest.fixture
def recipes_fixture() -> SiteFixture:
    return SiteFixture.from_file(str(SCENARIO_DIR / "recipes_site.yaml"))
