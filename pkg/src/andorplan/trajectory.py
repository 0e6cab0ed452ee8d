"""Append-only trajectory log: one structured record per engine event.

Records are JSON objects, one per line, with a sequence number that increases
by exactly one per record. Records carry no timestamps so a scripted run's log
is byte-identical across repetitions; this file format is the golden-trace and
replay surface.
"""

from __future__ import annotations

import json
from typing import Callable, Optional, TextIO

LOG_FORMAT = "trajectory/1"

EventListener = Callable[[dict], None]


class TrajectoryLog:
    """Writer fanning each record out to an optional file and listeners.

    ``collect=False`` drops record retention entirely (no stream, no memory);
    bulk test harnesses use it to run the engine without logging overhead.
    """

    def __init__(self, stream: Optional[TextIO] = None, collect: bool = True):
        self._stream = stream
        self._listeners: list[EventListener] = []
        self._seq = 0
        self._collect = collect or stream is not None
        self.records: list[dict] = []

    @property
    def seq(self) -> int:
        return self._seq

    def add_listener(self, listener: EventListener) -> None:
        self._listeners.append(listener)

    def emit(self, event: str, **payload) -> Optional[dict]:
        self._seq += 1
        if not self._collect and not self._listeners:
            return None
        record = {"seq": self._seq, "event": event}
        record.update(payload)
        if self._collect:
            self.records.append(record)
        if self._stream is not None:
            self._stream.write(json.dumps(record, separators=(",", ":")) + "\n")
            self._stream.flush()
        for listener in self._listeners:
            listener(record)
        return record


def read_log(path: str) -> list[dict]:
    """Parse a log file; raises ValueError with the first offending line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: unparseable record: {exc}") from None
            if not isinstance(record, dict) or "seq" not in record or "event" not in record:
                raise ValueError(f"line {lineno}: record missing seq/event")
            records.append(record)
    return records
