"""Rules engine for the five-player werewolf game.

Everything here is a deterministic function of the game state, its inputs and
a seeded ``random.Random``. The server and the replay tools drive the same
``step_phase`` transitions, which is what makes logs re-simulatable.
"""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

AGENT_IDS: tuple[int, ...] = (1, 2, 3, 4, 5)
MIN_TALK_TURNS = 5
MAX_DAY = 2

_AGENT_RE = re.compile(r"Agent\[0([1-5])\]")


class GameError(Exception):
    """A rules-level domain error (unknown agent, empty vote list, ...)."""


class ProtocolViolation(GameError):
    """An event or request that does not fit the current phase or role."""


class Role(str, Enum):
    VILLAGER = "VILLAGER"
    SEER = "SEER"
    POSSESSED = "POSSESSED"
    WEREWOLF = "WEREWOLF"

    @property
    def team(self) -> "Team":
        if self in (Role.WEREWOLF, Role.POSSESSED):
            return Team.WEREWOLF
        return Team.HUMAN

    @property
    def species(self) -> "Species":
        return Species.WEREWOLF if self is Role.WEREWOLF else Species.HUMAN


class Team(str, Enum):
    HUMAN = "HUMAN"
    WEREWOLF = "WEREWOLF"


class Species(str, Enum):
    # lowercase so a serialized divination never reads as a role name
    HUMAN = "human"
    WEREWOLF = "werewolf"


ROLE_MULTISET: tuple[Role, ...] = (
    Role.VILLAGER,
    Role.VILLAGER,
    Role.SEER,
    Role.POSSESSED,
    Role.WEREWOLF,
)


class PhaseKind(str, Enum):
    DAY0_GREETING = "DAY0_GREETING"
    NIGHT0_DIVINE = "NIGHT0_DIVINE"
    DAY_TALK = "DAY_TALK"
    NIGHT_VOTE = "NIGHT_VOTE"
    NIGHT_ATTACK = "NIGHT_ATTACK"
    NIGHT_DIVINE = "NIGHT_DIVINE"
    FINISHED = "FINISHED"


class WinReason(str, Enum):
    WEREWOLF_EXILED = "WEREWOLF_EXILED"
    PARITY_REACHED = "PARITY_REACHED"


def agent_name(agent: int) -> str:
    """Render an agent id the way every text surface shows it: ``Agent[03]``."""
    if agent not in AGENT_IDS:
        raise GameError(f"unknown agent id {agent!r}")
    return f"Agent[{agent:02d}]"


def find_agents(text: str) -> list[int]:
    """All ``Agent[0k]`` mentions in *text*, in order of appearance."""
    return [int(m) for m in _AGENT_RE.findall(text)]


def last_agent_mention(text: str) -> Optional[int]:
    found = find_agents(text)
    return found[-1] if found else None


@dataclass(frozen=True)
class Phase:
    kind: PhaseKind
    day: int = 0
    turn: int = 0

    def __str__(self) -> str:
        if self.kind is PhaseKind.DAY_TALK:
            return f"{self.kind.value}({self.day},{self.turn})"
        if self.kind in (PhaseKind.NIGHT_VOTE, PhaseKind.NIGHT_ATTACK, PhaseKind.NIGHT_DIVINE):
            return f"{self.kind.value}({self.day})"
        return self.kind.value


@dataclass(frozen=True)
class GameConfig:
    talk_turns_per_day: int = MIN_TALK_TURNS
    rng_seed: int = 0
    language_pack: str = "en"

    def __post_init__(self) -> None:
        if self.talk_turns_per_day < MIN_TALK_TURNS:
            raise GameError(
                f"talk_turns_per_day must be >= {MIN_TALK_TURNS}, got {self.talk_turns_per_day}"
            )

    def to_dict(self) -> dict:
        return {
            "talk_turns_per_day": self.talk_turns_per_day,
            "rng_seed": self.rng_seed,
            "language_pack": self.language_pack,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GameConfig":
        return cls(
            talk_turns_per_day=int(data["talk_turns_per_day"]),
            rng_seed=int(data["rng_seed"]),
            language_pack=str(data.get("language_pack", "en")),
        )


@dataclass(frozen=True)
class TalkEntry:
    day: int
    turn: int
    speaker: int
    text: str


@dataclass(frozen=True)
class VoteRecord:
    day: int
    voter: int
    target: int


@dataclass(frozen=True)
class DivineRecord:
    day: int
    seer: int
    target: int
    result: Species

    def sentence(self) -> str:
        return (
            f"On the night of Day {self.day}, I divined {agent_name(self.target)}, "
            f"and the result was {self.result.value}."
        )


@dataclass(frozen=True)
class AttackRecord:
    day: int
    attacker: int
    victim: int


@dataclass(frozen=True)
class GameOutcome:
    winner: Team
    reason: WinReason


# Phase-completion events. Each carries everything needed to apply the
# transition, so a log of these events is enough to rebuild the state.


@dataclass(frozen=True)
class TalkDone:
    day: int
    turn: int
    entries: tuple[TalkEntry, ...]


@dataclass(frozen=True)
class DivineDone:
    day: int
    record: Optional[DivineRecord]


@dataclass(frozen=True)
class VoteDone:
    day: int
    votes: tuple[VoteRecord, ...]
    exiled: int


@dataclass(frozen=True)
class AttackDone:
    day: int
    record: Optional[AttackRecord]


PhaseEvent = Union[TalkDone, DivineDone, VoteDone, AttackDone]


@dataclass
class GameState:
    config: GameConfig
    assignment: dict[int, Role]
    alive: set[int] = field(default_factory=lambda: set(AGENT_IDS))
    phase: Phase = Phase(PhaseKind.DAY0_GREETING)
    talk_history: list[TalkEntry] = field(default_factory=list)
    vote_history: list[list[VoteRecord]] = field(default_factory=list)
    divine_history: list[DivineRecord] = field(default_factory=list)
    attack_history: list[AttackRecord] = field(default_factory=list)
    exile_history: list[tuple[int, int]] = field(default_factory=list)
    outcome: Optional[GameOutcome] = None

    @classmethod
    def new(cls, config: GameConfig, assignment: dict[int, Role]) -> "GameState":
        if sorted(assignment) != list(AGENT_IDS):
            raise GameError("assignment must cover agents 1..5")
        if sorted(assignment.values()) != sorted(ROLE_MULTISET):
            raise GameError("assignment must use the fixed role multiset")
        return cls(config=config, assignment=dict(assignment))

    def agent_with(self, role: Role) -> int:
        for agent, r in self.assignment.items():
            if r is role:
                return agent
        raise GameError(f"no agent holds {role.value}")

    def is_alive(self, agent: int) -> bool:
        return agent in self.alive

    @property
    def finished(self) -> bool:
        return self.phase.kind is PhaseKind.FINISHED

    def status_of(self, agent: int) -> str:
        if agent in self.alive:
            return "ALIVE"
        if any(a == agent for _, a in self.exile_history):
            return "EXILED"
        return "ATTACKED"

    def exiled_on(self, day: int) -> Optional[int]:
        for d, agent in self.exile_history:
            if d == day:
                return agent
        return None

    def attacked_on(self, day: int) -> Optional[int]:
        for rec in self.attack_history:
            if rec.day == day:
                return rec.victim
        return None


def assign_roles(config: GameConfig, rng: random.Random) -> dict[int, Role]:
    """Uniformly random permutation of the fixed role multiset over agents 1..5."""
    roles = list(ROLE_MULTISET)
    rng.shuffle(roles)
    return dict(zip(AGENT_IDS, roles))


def speaking_order(alive: Iterable[int], rng: random.Random) -> list[int]:
    order = sorted(alive)
    if not order:
        raise GameError("speaking_order needs at least one alive agent")
    rng.shuffle(order)
    return order


def divine(assignment: dict[int, Role], target: int) -> Species:
    try:
        return assignment[target].species
    except KeyError:
        raise GameError(f"unknown divination target {target!r}") from None


def top_candidates(votes: Sequence[VoteRecord]) -> list[int]:
    """Agents sharing the maximal vote count, ascending by id."""
    if not votes:
        raise GameError("cannot tally an empty vote list")
    counts = Counter(v.target for v in votes)
    best = max(counts.values())
    return sorted(a for a, c in counts.items() if c == best)


def tally_votes(votes: Sequence[VoteRecord], rng: random.Random) -> int:
    """Agent to exile. The rng is only consumed when there is a tie."""
    tied = top_candidates(votes)
    if len(tied) == 1:
        return tied[0]
    return rng.choice(tied)


def check_winner(state: GameState) -> Optional[GameOutcome]:
    werewolf = state.agent_with(Role.WEREWOLF)
    if any(agent == werewolf for _, agent in state.exile_history):
        return GameOutcome(Team.HUMAN, WinReason.WEREWOLF_EXILED)
    wolves = sum(1 for a in state.alive if state.assignment[a].species is Species.WEREWOLF)
    humans = len(state.alive) - wolves
    if wolves >= humans:
        return GameOutcome(Team.WEREWOLF, WinReason.PARITY_REACHED)
    return None


def _expect(state: GameState, kind: PhaseKind, event: PhaseEvent, day: int) -> None:
    if state.phase.kind is not kind or state.phase.day != day:
        raise ProtocolViolation(f"{type(event).__name__} does not match phase {state.phase}")


def _finish_if_won(state: GameState) -> bool:
    outcome = check_winner(state)
    if outcome is not None:
        state.outcome = outcome
        state.phase = Phase(PhaseKind.FINISHED, state.phase.day)
        return True
    return False


def _after_attack(state: GameState, day: int) -> Phase:
    seer = state.agent_with(Role.SEER)
    if day < MAX_DAY and seer in state.alive:
        return Phase(PhaseKind.NIGHT_DIVINE, day)
    return Phase(PhaseKind.DAY_TALK, day + 1, 1)


def step_phase(state: GameState, event: PhaseEvent) -> GameState:
    """Apply one phase-completion event and advance the phase.

    Mutates and returns *state*. Raises ProtocolViolation if *event* does not
    belong to the current phase, or if its payload breaks a rule.
    """
    phase = state.phase
    if phase.kind is PhaseKind.FINISHED:
        raise ProtocolViolation("game already finished")

    if isinstance(event, TalkDone):
        if phase.kind is PhaseKind.DAY0_GREETING:
            if (event.day, event.turn) != (0, 0):
                raise ProtocolViolation(f"greeting event for day {event.day} turn {event.turn}")
        elif phase.kind is not PhaseKind.DAY_TALK or (phase.day, phase.turn) != (event.day, event.turn):
            raise ProtocolViolation(f"TalkDone({event.day},{event.turn}) does not match {phase}")
        speakers = [e.speaker for e in event.entries]
        if sorted(speakers) != sorted(state.alive):
            raise ProtocolViolation("every alive agent speaks exactly once per turn")
        state.talk_history.extend(event.entries)
        if phase.kind is PhaseKind.DAY0_GREETING:
            state.phase = Phase(PhaseKind.NIGHT0_DIVINE)
        elif phase.turn < state.config.talk_turns_per_day:
            state.phase = Phase(PhaseKind.DAY_TALK, phase.day, phase.turn + 1)
        else:
            state.phase = Phase(PhaseKind.NIGHT_VOTE, phase.day)
        return state

    if isinstance(event, DivineDone):
        if phase.kind is PhaseKind.NIGHT0_DIVINE:
            expected_day = 0
        elif phase.kind is PhaseKind.NIGHT_DIVINE:
            expected_day = phase.day
        else:
            raise ProtocolViolation(f"DivineDone does not match {phase}")
        if event.day != expected_day:
            raise ProtocolViolation(f"DivineDone for night {event.day} during {phase}")
        rec = event.record
        if rec is not None:
            seer = state.agent_with(Role.SEER)
            if rec.seer != seer or seer not in state.alive:
                raise ProtocolViolation("only the living seer divines")
            if rec.target == seer or rec.target not in state.assignment:
                raise ProtocolViolation(f"illegal divination target {rec.target}")
            if rec.result is not divine(state.assignment, rec.target):
                raise ProtocolViolation("divination result disagrees with the assignment")
            state.divine_history.append(rec)
        state.phase = Phase(PhaseKind.DAY_TALK, event.day + 1, 1)
        return state

    if isinstance(event, VoteDone):
        _expect(state, PhaseKind.NIGHT_VOTE, event, event.day)
        voters = sorted(v.voter for v in event.votes)
        if voters != sorted(state.alive):
            raise ProtocolViolation("every alive agent votes exactly once")
        for v in event.votes:
            if v.voter == v.target or v.target not in state.alive:
                raise ProtocolViolation(f"illegal vote {v}")
        if event.exiled not in top_candidates(event.votes):
            raise ProtocolViolation(f"exiled agent {event.exiled} did not receive the most votes")
        state.vote_history.append(list(event.votes))
        state.alive.discard(event.exiled)
        state.exile_history.append((event.day, event.exiled))
        if not _finish_if_won(state):
            state.phase = Phase(PhaseKind.NIGHT_ATTACK, event.day)
        return state

    if isinstance(event, AttackDone):
        _expect(state, PhaseKind.NIGHT_ATTACK, event, event.day)
        rec = event.record
        if rec is not None:
            if state.assignment[rec.attacker] is not Role.WEREWOLF or rec.attacker not in state.alive:
                raise ProtocolViolation("only the living werewolf attacks")
            if rec.victim == rec.attacker or rec.victim not in state.alive:
                raise ProtocolViolation(f"illegal attack victim {rec.victim}")
            state.attack_history.append(rec)
            state.alive.discard(rec.victim)
        if _finish_if_won(state):
            return state
        if event.day >= MAX_DAY:
            # unreachable with five players: day 2's exile always decides the game
            raise GameError("no winner at the day cap")
        state.phase = _after_attack(state, event.day)
        return state

    raise ProtocolViolation(f"unknown event {event!r}")
