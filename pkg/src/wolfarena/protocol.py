"""Wire format between server and agents.

One JSON object per line. Server packets carry ``request``, ``gameInfo`` and,
for talk requests only, ``turn``. Agents answer talk/action requests with a
single plain-text line; informational requests get no answer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .game import (
    AGENT_IDS,
    DivineRecord,
    GameState,
    PhaseKind,
    ProtocolViolation,
    Role,
    Species,
    TalkEntry,
    last_agent_mention,
)

SKIP = "Skip"
STATUS_VALUES = ("ALIVE", "EXILED", "ATTACKED")


class RequestKind(str, Enum):
    INITIALIZE = "INITIALIZE"
    DAILY_INITIALIZE = "DAILY_INITIALIZE"
    TALK = "TALK"
    VOTE = "VOTE"
    DIVINE = "DIVINE"
    ATTACK = "ATTACK"
    FINISH = "FINISH"

    @property
    def needs_response(self) -> bool:
        return self in ACTION_KINDS or self is RequestKind.TALK


ACTION_KINDS = frozenset({RequestKind.VOTE, RequestKind.DIVINE, RequestKind.ATTACK})


class MalformedResponse(ValueError):
    """An agent answer that cannot be turned into a legal response."""


class PacketDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class GameInfoView:
    day: int
    phase: str
    self_id: int
    self_role: Role
    status_map: dict[int, str]
    talk_list: tuple[TalkEntry, ...] = ()
    my_divine_results: tuple[DivineRecord, ...] = ()
    executed: Optional[int] = None
    attacked: Optional[int] = None

    def alive_agents(self) -> list[int]:
        return sorted(a for a, s in self.status_map.items() if s == "ALIVE")

    def to_dict(self) -> dict:
        return {
            "day": self.day,
            "phase": self.phase,
            "agentIdx": self.self_id,
            "role": self.self_role.value,
            "statusMap": {str(a): s for a, s in sorted(self.status_map.items())},
            "talkList": [
                {"day": t.day, "turn": t.turn, "agent": t.speaker, "text": t.text}
                for t in self.talk_list
            ],
            "divineResults": [
                {"day": d.day, "agent": d.seer, "target": d.target, "result": d.result.value}
                for d in self.my_divine_results
            ],
            "executed": self.executed,
            "attacked": self.attacked,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GameInfoView":
        status = {int(k): v for k, v in data["statusMap"].items()}
        for v in status.values():
            if v not in STATUS_VALUES:
                raise PacketDecodeError(f"bad status {v!r}")
        return cls(
            day=int(data["day"]),
            phase=str(data["phase"]),
            self_id=int(data["agentIdx"]),
            self_role=Role(data["role"]),
            status_map=status,
            talk_list=tuple(
                TalkEntry(int(t["day"]), int(t["turn"]), int(t["agent"]), str(t["text"]))
                for t in data["talkList"]
            ),
            my_divine_results=tuple(
                DivineRecord(int(d["day"]), int(d["agent"]), int(d["target"]), Species(d["result"]))
                for d in data["divineResults"]
            ),
            executed=data.get("executed"),
            attacked=data.get("attacked"),
        )


@dataclass(frozen=True)
class Packet:
    request: RequestKind
    game_info: GameInfoView
    turn: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.request is RequestKind.TALK) != (self.turn is not None):
            raise ValueError("turn is set exactly on TALK packets")


@dataclass(frozen=True)
class AgentResponse:
    kind: RequestKind
    text: Optional[str] = None
    target: Optional[int] = None


def encode_packet(packet: Packet) -> bytes:
    obj = {"request": packet.request.value, "gameInfo": packet.game_info.to_dict()}
    if packet.request is RequestKind.TALK:
        obj["turn"] = packet.turn
    # json escapes control characters, so the only newline is the terminator
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_packet(line: bytes) -> Packet:
    try:
        obj = json.loads(line.decode("utf-8"))
        kind = RequestKind(obj["request"])
        info = GameInfoView.from_dict(obj["gameInfo"])
        turn = obj.get("turn")
        return Packet(kind, info, int(turn) if turn is not None else None)
    except (ValueError, KeyError, TypeError) as exc:
        raise PacketDecodeError(f"undecodable packet: {exc}") from exc


def encode_response(text: str) -> bytes:
    flat = " ".join(text.split())
    return flat.encode("utf-8") + b"\n"


def decode_response(kind: RequestKind, raw: bytes) -> AgentResponse:
    """Parse one agent answer line.

    Talk text is kept as sent (minus the line terminator). Action answers
    resolve to the *last* ``Agent[0k]`` mentioned on the line.
    """
    try:
        line = raw.decode("utf-8").rstrip("\r\n")
    except UnicodeDecodeError as exc:
        raise MalformedResponse(f"response is not utf-8: {exc}") from exc
    if kind is RequestKind.TALK:
        return AgentResponse(kind, text=line)
    if kind not in ACTION_KINDS:
        raise ProtocolViolation(f"{kind.value} requests take no response")
    target = last_agent_mention(line)
    if target is None:
        raise MalformedResponse(f"no Agent[0k] target in {line[:80]!r}")
    return AgentResponse(kind, target=target)


def build_game_info_view(
    state: GameState, receiver: int, pending_talk: Sequence[TalkEntry] = ()
) -> GameInfoView:
    """Project *state* onto what *receiver* may know.

    *pending_talk* holds utterances of the turn in progress, which the engine
    only commits once the whole turn is done.
    """
    if receiver not in state.assignment:
        raise ProtocolViolation(f"agent {receiver} is not in this game")
    role = state.assignment[receiver]
    phase = state.phase
    day = phase.day
    divines: tuple[DivineRecord, ...] = ()
    if role is Role.SEER:
        divines = tuple(d for d in state.divine_history if d.seer == receiver)
    # previous night's results are news for the current day
    news_day = day - 1 if phase.kind is PhaseKind.DAY_TALK else day
    return GameInfoView(
        day=day,
        phase=str(phase),
        self_id=receiver,
        self_role=role,
        status_map={a: state.status_of(a) for a in AGENT_IDS},
        talk_list=(*state.talk_history, *pending_talk),
        my_divine_results=divines,
        executed=state.exiled_on(news_day),
        attacked=state.attacked_on(news_day),
    )
