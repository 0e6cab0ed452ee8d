"""Browser action grammar, observation model, and a deterministic simulated site.

The simulated site is driven by page-graph fixtures so engine behaviour is a
pure function of (fixture, action sequence). A real-browser backend would
implement the same ``step`` / ``get_url`` / ``navigate`` surface.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

import yaml

logger = logging.getLogger(__name__)

FIXTURE_FORMAT = "site-fixture/1"
DEFAULT_WINDOW_SIZE = 20


class ActionParseError(Exception):
    """The text does not conform to the browser action grammar."""


class FixtureError(Exception):
    """The site fixture file is malformed or internally inconsistent."""


class ActionKind(str, Enum):
    CLICK = "click"
    TYPE = "type"
    GO_BACK = "go_back"
    GO_HOME = "go_home"
    GOTO = "goto"
    SCROLL = "scroll"
    NOTE = "note"
    STOP = "stop"


@dataclass(frozen=True)
class Action:
    """One grammar-conformant browser command."""

    kind: ActionKind
    element_id: Optional[int] = None
    text: str = ""
    press_enter: bool = False
    url: str = ""
    direction: str = ""
    answer: str = ""

    @property
    def is_note(self) -> bool:
        return self.kind is ActionKind.NOTE

    def render(self) -> str:
        if self.kind is ActionKind.CLICK:
            return f"click [{self.element_id}]"
        if self.kind is ActionKind.TYPE:
            return f"type [{self.element_id}] [{self.text}] [{1 if self.press_enter else 0}]"
        if self.kind is ActionKind.GOTO:
            return f"goto [{self.url}]"
        if self.kind is ActionKind.SCROLL:
            return f"scroll [{self.direction}]"
        if self.kind is ActionKind.NOTE:
            return f"note [{self.text}]"
        if self.kind is ActionKind.STOP:
            return f"stop [{self.answer}]" if self.answer else "stop"
        return self.kind.value


_CLICK_RE = re.compile(r"^click \[(\d+)\]$")
_TYPE_RE = re.compile(r"^type \[(\d+)\] \[(.*)\] \[([01])\]$")
_GOTO_RE = re.compile(r"^goto \[(\S+)\]$")
_SCROLL_RE = re.compile(r"^scroll \[(up|down)\]$")
_NOTE_RE = re.compile(r"^note \[(.*)\]$")
_STOP_RE = re.compile(r"^stop(?: \[(.*)\])?$")


def parse_action(text: str) -> Action:
    """Parse one browser command; surrounding prose is rejected."""
    text = text.strip()
    m = _CLICK_RE.match(text)
    if m:
        return Action(ActionKind.CLICK, element_id=int(m.group(1)))
    m = _TYPE_RE.match(text)
    if m:
        return Action(
            ActionKind.TYPE,
            element_id=int(m.group(1)),
            text=m.group(2),
            press_enter=m.group(3) == "1",
        )
    if text == "go_back":
        return Action(ActionKind.GO_BACK)
    if text == "go_home":
        return Action(ActionKind.GO_HOME)
    m = _GOTO_RE.match(text)
    if m:
        return Action(ActionKind.GOTO, url=m.group(1))
    m = _SCROLL_RE.match(text)
    if m:
        return Action(ActionKind.SCROLL, direction=m.group(1))
    m = _NOTE_RE.match(text)
    if m:
        return Action(ActionKind.NOTE, text=m.group(1))
    m = _STOP_RE.match(text)
    if m:
        return Action(ActionKind.STOP, answer=m.group(1) or "")
    raise ActionParseError(f"unrecognized action: {text!r}")


@dataclass(frozen=True)
class Element:
    id: int
    kind: str
    label: str


@dataclass
class Observation:
    """Environment snapshot: URL plus element-id-annotated page text."""

    url: str
    page_text: str
    elements: dict[int, Element]

    def element_ids(self) -> list[int]:
        return sorted(self.elements)


@dataclass
class Transition:
    element: int
    target: str
    pattern: str = ""  # case-insensitive substring match on typed text; "" matches all
    fails_before_success: int = 0

    def matches_text(self, text: str) -> bool:
        return self.pattern.lower() in text.lower() if self.pattern else True


@dataclass
class Page:
    url: str
    text: list[str] = field(default_factory=list)
    elements: list[Element] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = list(self.text)
        for el in self.elements:
            out.append(f"[{el.id}] {el.kind} '{el.label}'")
        return out


@dataclass
class SiteFixture:
    """Page graph: urls, elements, and (element, typed-text) -> url transitions."""

    start_url: str
    pages: dict[str, Page]
    window_size: int = DEFAULT_WINDOW_SIZE

    @classmethod
    def from_dict(cls, data: dict) -> "SiteFixture":
        if data.get("format") != FIXTURE_FORMAT:
            raise FixtureError(f"unsupported fixture format {data.get('format')!r}")
        pages = {}
        for url, spec in (data.get("pages") or {}).items():
            spec = spec or {}
            elements = [
                Element(int(e["id"]), str(e.get("kind", "element")), str(e.get("label", "")))
                for e in spec.get("elements") or []
            ]
            ids = [e.id for e in elements]
            if len(set(ids)) != len(ids):
                raise FixtureError(f"page {url} repeats element ids")
            transitions = [
                Transition(
                    element=int(t["element"]),
                    target=str(t["target"]),
                    pattern=str(t.get("pattern", "")),
                    fails_before_success=int(t.get("fails_before_success", 0)),
                )
                for t in spec.get("transitions") or []
            ]
            text = [str(line) for line in spec.get("text") or []]
            pages[url] = Page(url=url, text=text, elements=elements, transitions=transitions)
        start_url = data.get("start_url")
        if start_url not in pages:
            raise FixtureError(f"start_url {start_url!r} is not a defined page")
        for page in pages.values():
            element_ids = {e.id for e in page.elements}
            for t in page.transitions:
                if t.element not in element_ids:
                    raise FixtureError(
                        f"page {page.url} transition references unknown element {t.element}"
                    )
                if t.target not in pages:
                    raise FixtureError(
                        f"page {page.url} transition targets undefined page {t.target!r}"
                    )
        window = int(data.get("window_size", DEFAULT_WINDOW_SIZE))
        if window < 1:
            raise FixtureError("window_size must be >= 1")
        return cls(start_url=start_url, pages=pages, window_size=window)

    @classmethod
    def from_file(cls, path: str) -> "SiteFixture":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise FixtureError(f"fixture {path} is not a mapping")
        return cls.from_dict(data)


class BrowserEnvironment(Protocol):
    """Adapter contract a real-browser backend must satisfy.

    ``steps`` counts observation-relevant (non-note) actions.
    """

    steps: int

    def get_url(self) -> str: ...

    def done(self) -> bool: ...

    def observe(self) -> Observation: ...

    def navigate(self, url: str) -> bool: ...

    def step(self, action: Action) -> tuple[bool, Observation]: ...


class SimulatedBrowser:
    """Deterministic environment over a SiteFixture.

    ``steps`` counts observation-relevant actions only; note actions leave the
    counter and all state untouched.
    """

    def __init__(self, fixture: SiteFixture):
        self.fixture = fixture
        self._url = fixture.start_url
        self._history: list[str] = []
        self._scroll = 0
        self._fail_budget: dict[tuple[str, int, str], int] = {}
        for page in fixture.pages.values():
            for t in page.transitions:
                if t.fails_before_success:
                    self._fail_budget[(page.url, t.element, t.pattern)] = t.fails_before_success
        self.steps = 0
        self._done = False

    # -- queries ---------------------------------------------------------

    def get_url(self) -> str:
        return self._url

    def done(self) -> bool:
        return self._done

    def observe(self) -> Observation:
        page = self.fixture.pages[self._url]
        lines = page.lines()
        start = self._scroll * self.fixture.window_size
        window = lines[start : start + self.fixture.window_size]
        visible_ids = set()
        for line in window:
            m = re.match(r"^\[(\d+)\]", line)
            if m:
                visible_ids.add(int(m.group(1)))
        elements = {e.id: e for e in page.elements if e.id in visible_ids}
        return Observation(url=self._url, page_text="\n".join(window), elements=elements)

    # -- mutations --------------------------------------------------------

    def navigate(self, url: str) -> bool:
        """Jump straight to a defined page; used for rollback."""
        if url not in self.fixture.pages:
            return False
        if url != self._url:
            self._history.append(self._url)
            self._url = url
            self._scroll = 0
        return True

    def step(self, action: Action) -> tuple[bool, Observation]:
        if action.kind is ActionKind.NOTE:
            return True, self.observe()
        if action.kind is ActionKind.STOP:
            self._done = True
            self.steps += 1
            return True, self.observe()

        self.steps += 1
        if action.kind is ActionKind.CLICK:
            return self._follow(action.element_id, typed=None), self.observe()
        if action.kind is ActionKind.TYPE:
            return self._follow(action.element_id, typed=action.text), self.observe()
        if action.kind is ActionKind.GO_BACK:
            if not self._history:
                return False, self.observe()
            self._url = self._history.pop()
            self._scroll = 0
            return True, self.observe()
        if action.kind is ActionKind.GO_HOME:
            return self.navigate(self.fixture.start_url), self.observe()
        if action.kind is ActionKind.GOTO:
            return self.navigate(action.url), self.observe()
        if action.kind is ActionKind.SCROLL:
            return self._scroll_window(action.direction), self.observe()
        raise ActionParseError(f"unsupported action kind {action.kind}")

    def _scroll_window(self, direction: str) -> bool:
        page = self.fixture.pages[self._url]
        max_offset = max(0, (len(page.lines()) - 1) // self.fixture.window_size)
        if direction == "down" and self._scroll < max_offset:
            self._scroll += 1
            return True
        if direction == "up" and self._scroll > 0:
            self._scroll -= 1
            return True
        return False

    def _follow(self, element_id: Optional[int], typed: Optional[str]) -> bool:
        page = self.fixture.pages[self._url]
        if element_id not in {e.id for e in page.elements}:
            return False
        for t in page.transitions:
            if t.element != element_id:
                continue
            if typed is not None and not t.matches_text(typed):
                continue
            key = (page.url, t.element, t.pattern)
            if self._fail_budget.get(key, 0) > 0:
                self._fail_budget[key] -= 1
                return False
            self._history.append(self._url)
            self._url = t.target
            self._scroll = 0
            return True
        return False
