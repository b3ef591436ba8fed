"""Append-only game event log, persisted as one JSON object per line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Union

from .game import GameConfig, GameOutcome, Role, Team, WinReason

# required keys per event type
EVENT_SCHEMA: dict[str, tuple[str, ...]] = {
    "phase": ("phase", "day", "turn", "alive"),
    "talk": ("day", "turn", "agent", "text", "fallback"),
    "vote": ("day", "voter", "target", "fallback"),
    "tiebreak": ("day", "candidates", "chosen"),
    "exile": ("day", "agent"),
    "attack": ("day", "attacker", "victim", "fallback"),
    "divine": ("day", "seer", "target", "result", "fallback"),
    "fallback": ("day", "agent", "request", "reason"),
    "outcome": ("winner", "reason"),
    "aborted": ("reason",),
}


class LogParseError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"event {index}: {message}")
        self.index = index


@dataclass
class GameLog:
    config: GameConfig
    assignment: dict[int, Role]
    events: list[dict[str, Any]] = field(default_factory=list)
    seat_labels: dict[int, str] = field(default_factory=dict)
    # logical clock by default so identical games give byte-identical files
    clock: Optional[Callable[[], float]] = field(default=None, repr=False, compare=False)

    def append(self, type_: str, **fields: Any) -> dict[str, Any]:
        seq = len(self.events)
        event = {"seq": seq, "ts": self.clock() if self.clock else seq, "type": type_, **fields}
        self.events.append(event)
        return event

    def of_type(self, *types: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["type"] in types]

    @property
    def outcome(self) -> Optional[GameOutcome]:
        for e in self.events:
            if e["type"] == "outcome":
                return GameOutcome(Team(e["winner"]), WinReason(e["reason"]))
        return None

    @property
    def aborted(self) -> Optional[str]:
        for e in self.events:
            if e["type"] == "aborted":
                return e["reason"]
        return None

    @property
    def fallback_count(self) -> int:
        return len(self.of_type("fallback"))

    def header(self) -> dict[str, Any]:
        head = {
            "type": "header",
            "config": self.config.to_dict(),
            "assignment": {str(a): r.value for a, r in sorted(self.assignment.items())},
        }
        if self.seat_labels:
            head["seats"] = {str(a): s for a, s in sorted(self.seat_labels.items())}
        return head

    def to_lines(self) -> list[str]:
        dump = lambda obj: json.dumps(obj, ensure_ascii=False, sort_keys=True)
        return [dump(self.header())] + [dump(e) for e in self.events]

    def dumps(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "GameLog":
        lines = [ln for ln in lines if ln.strip()]
        if not lines:
            raise LogParseError(-1, "empty log")
        try:
            head = json.loads(lines[0])
            if head.get("type") != "header":
                raise ValueError("first line is not a header")
            config = GameConfig.from_dict(head["config"])
            assignment = {int(a): Role(r) for a, r in head["assignment"].items()}
            seats = {int(a): str(s) for a, s in head.get("seats", {}).items()}
        except (ValueError, KeyError, TypeError) as exc:
            raise LogParseError(-1, f"bad header: {exc}") from exc
        log = cls(config, assignment, seat_labels=seats)
        for i, line in enumerate(lines[1:]):
            try:
                event = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(i, f"not JSON: {exc}") from exc
            validate_event(i, event)
            log.events.append(event)
        return log

    @classmethod
    def loads(cls, text: str) -> "GameLog":
        return cls.from_lines(text.splitlines())

    @classmethod
    def read(cls, path: Union[str, Path]) -> "GameLog":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def validate_event(index: int, event: Any) -> None:
    if not isinstance(event, dict):
        raise LogParseError(index, "event is not an object")
    kind = event.get("type")
    if kind not in EVENT_SCHEMA:
        raise LogParseError(index, f"unknown event type {kind!r}")
    missing = [k for k in EVENT_SCHEMA[kind] if k not in event]
    if missing:
        raise LogParseError(index, f"{kind} event lacks {missing}")
    if event.get("seq") != index:
        raise LogParseError(index, f"sequence number {event.get('seq')!r} out of order")
