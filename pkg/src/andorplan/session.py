"""One live run: engine thread, intervention mailbox, published snapshots.

The engine runs on a dedicated thread and drains the mailbox only at step
boundaries; readers get the last snapshot the engine published, never a view
of in-flight mutations.
"""

from __future__ import annotations

import logging
import queue
import threading
from typing import Optional

from .engine import (
    Engine,
    InterventionDirective,
    InterventionResult,
    RunResult,
    _Reply,
)

logger = logging.getLogger(__name__)

INTERVENTION_TIMEOUT = 10.0


class RunSession:
    """Thread-safe wrapper the service and CLI drive a live engine through."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self._mailbox: queue.Queue = queue.Queue()
        engine.mailbox = self._mailbox
        engine.snapshot_sink = self._publish
        self._snapshot_lock = threading.Lock()
        self._latest_snapshot: dict = engine.build_snapshot()
        self._events_lock = threading.Lock()
        self._events: list[dict] = []
        engine.log.add_listener(self._on_event)
        self._result: Optional[RunResult] = None
        self._thread: Optional[threading.Thread] = None

    # -- engine lifecycle ----------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            raise RuntimeError("session already started")
        self._thread = threading.Thread(target=self._run, name="andorplan-engine")
        self._thread.start()

    def _run(self) -> None:
        try:
            self._result = self.engine.run()
        except Exception:
            logger.exception("engine thread crashed")
        finally:
            self._publish(self.engine.build_snapshot())

    def wait(self, timeout: Optional[float] = None) -> Optional[RunResult]:
        if self._thread is not None:
            self._thread.join(timeout)
        return self._result

    def abort(self) -> None:
        """Best-effort shutdown used by tests and service teardown."""
        if self.finished:
            return
        self.submit(InterventionDirective(kind="abort"))
        self.wait(timeout=INTERVENTION_TIMEOUT)

    @property
    def finished(self) -> bool:
        return self._thread is not None and not self._thread.is_alive()

    @property
    def result(self) -> Optional[RunResult]:
        return self._result

    @property
    def state(self) -> str:
        if self._thread is None:
            return "created"
        if self.finished:
            return "finished"
        return self.engine.state

    # -- reads ----------------------------------------------------------------

    def _publish(self, snapshot: dict) -> None:
        with self._snapshot_lock:
            self._latest_snapshot = snapshot

    def snapshot(self) -> dict:
        if self.finished:
            return self.engine.build_snapshot()
        with self._snapshot_lock:
            return self._latest_snapshot

    def _on_event(self, record: dict) -> None:
        with self._events_lock:
            self._events.append(record)

    def events_after(self, after_seq: int) -> list[dict]:
        with self._events_lock:
            return [r for r in self._events if r["seq"] > after_seq]

    # -- interventions ----------------------------------------------------------

    def submit(self, directive: InterventionDirective) -> InterventionResult:
        if self.finished:
            return InterventionResult(False, "run already terminated")
        reply = _Reply()
        self._mailbox.put((directive, reply))
        result = reply.wait(INTERVENTION_TIMEOUT)
        if result is None:
            if self.finished:
                return InterventionResult(False, "run terminated before the directive applied")
            return InterventionResult(False, "engine did not acknowledge in time")
        return result
