"""Re-simulation of logged games and the human-readable transcript format."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .game import (
    AttackDone,
    AttackRecord,
    DivineDone,
    DivineRecord,
    GameConfig,
    GameError,
    GameState,
    Phase,
    PhaseEvent,
    PhaseKind,
    Role,
    Species,
    TalkDone,
    TalkEntry,
    VoteDone,
    VoteRecord,
    agent_name,
    step_phase,
)
from .gamelog import GameLog, LogParseError, validate_event


class ReplayMismatch(AssertionError):
    pass


@dataclass
class PhaseGroup:
    event: PhaseEvent
    members: list[dict[str, Any]] = field(default_factory=list)


def phase_groups(events: Iterable[dict[str, Any]]) -> list[PhaseGroup]:
    """Fold logged action events back into engine phase-completion events.

    ``phase``/``outcome``/``aborted`` markers are ignored. Fallback and
    tie-break notes stay with the group they belong to, in log order.
    """
    groups: list[PhaseGroup] = []
    talk: list[dict] = []
    talk_key: Optional[tuple[int, int]] = None
    talk_notes: list[dict] = []
    pending: list[dict] = []

    def flush_talk() -> None:
        nonlocal talk, talk_key
        if talk:
            entries = tuple(
                TalkEntry(e["day"], e["turn"], e["agent"], e["text"]) for e in talk if e["type"] == "talk"
            )
            groups.append(PhaseGroup(TalkDone(talk_key[0], talk_key[1], entries), talk))
        talk, talk_key = [], None

    for e in events:
        kind = e["type"]
        if kind in ("phase", "outcome", "aborted"):
            continue
        if kind == "fallback" and e["request"] == "TALK":
            talk_notes.append(e)
            continue
        if kind == "talk":
            key = (e["day"], e["turn"])
            if talk and key != talk_key:
                flush_talk()
            talk.extend(talk_notes)
            talk.append(e)
            talk_key, talk_notes = key, []
            continue
        flush_talk()
        pending.append(e)
        if kind == "exile":
            recs = tuple(VoteRecord(v["day"], v["voter"], v["target"]) for v in pending if v["type"] == "vote")
            groups.append(PhaseGroup(VoteDone(e["day"], recs, e["agent"]), pending))
        elif kind == "attack":
            rec = AttackRecord(e["day"], e["attacker"], e["victim"])
            groups.append(PhaseGroup(AttackDone(e["day"], rec), pending))
        elif kind == "divine":
            rec = DivineRecord(e["day"], e["seer"], e["target"], Species(e["result"]))
            groups.append(PhaseGroup(DivineDone(e["day"], rec), pending))
        else:
            continue
        pending = []
    flush_talk()
    return groups


def _phase_of(e: dict) -> tuple[Phase, tuple[int, ...]]:
    return Phase(PhaseKind(e["phase"]), e["day"], e["turn"]), tuple(e["alive"])


def resimulate(game_log: GameLog) -> tuple[GameState, list[tuple[Phase, tuple[int, ...]]]]:
    """Drive the engine through the logged events; returns the final state and
    the (phase, alive) pair reached after every transition, starting state included."""
    state = GameState.new(game_log.config, game_log.assignment)
    trace = [(state.phase, tuple(sorted(state.alive)))]
    for group in phase_groups(game_log.events):
        state = step_phase(state, group.event)
        trace.append((state.phase, tuple(sorted(state.alive))))
    return state, trace


def verify_log(game_log: GameLog) -> GameState:
    """Check that re-simulation reproduces every logged phase boundary and the outcome."""
    state, trace = resimulate(game_log)
    logged = [_phase_of(e) for e in game_log.of_type("phase")]
    if logged != trace:
        raise ReplayMismatch(f"phase trace differs: logged {logged!r} vs replay {trace!r}")
    if not game_log.aborted and game_log.outcome != state.outcome:
        raise ReplayMismatch(f"outcome differs: logged {game_log.outcome} vs replay {state.outcome}")
    return state


def rebuild_log(
    config: GameConfig,
    assignment: dict[int, Role],
    action_events: list[dict[str, Any]],
    tail: Iterable[dict[str, Any]] = (),
) -> GameLog:
    """Assemble a full log (phase markers included) from action events alone."""
    game_log = GameLog(config, dict(assignment))
    state = GameState.new(config, assignment)

    def mark() -> None:
        p = state.phase
        game_log.append("phase", phase=p.kind.value, day=p.day, turn=p.turn, alive=sorted(state.alive))

    def copy(e: dict) -> None:
        game_log.append(e["type"], **{k: v for k, v in e.items() if k not in ("seq", "ts", "type")})

    mark()
    for group in phase_groups(action_events):
        for e in group.members:
            copy(e)
        state = step_phase(state, group.event)
        mark()
    for e in tail:
        copy(e)
    return game_log


# -- transcript ------------------------------------------------------------------

_FALLBACK_SUFFIX = re.compile(r"^(.*) \[fallback: (.*)\]$")


def _fb(fallbacks: dict[tuple, str], key: tuple) -> str:
    reason = fallbacks.get(key)
    return f" [fallback: {reason}]" if reason is not None else ""


def render_replay(game_log: GameLog) -> str:
    """Day-by-day transcript. Stable formatting, parseable by ``parse_transcript``."""
    for i, e in enumerate(game_log.events):
        validate_event(i, e)
    cfg = game_log.config
    out = [
        f"Game seed={cfg.rng_seed} talk_turns={cfg.talk_turns_per_day} lang={cfg.language_pack}",
        "Roles: " + " ".join(f"{agent_name(a)}={r.value}" for a, r in sorted(game_log.assignment.items())),
    ]
    pending_fb: dict[tuple, str] = {}
    section: Optional[tuple] = None
    votes: list[dict] = []

    def open_section(key: tuple, *lines: str) -> None:
        nonlocal section
        if section != key:
            out.extend(lines)
            section = key

    for i, e in enumerate(game_log.events):
        kind = e["type"]
        try:
            if kind == "fallback":
                pending_fb[(e["request"], e["agent"])] = e["reason"]
            elif kind == "talk":
                day, turn = e["day"], e["turn"]
                if day == 0:
                    open_section(("talk", 0, 0), "== Day 0 ==", "Greetings")
                else:
                    if section is None or section[1] != day or section[0] != "talk":
                        out.append(f"== Day {day} ==")
                    open_section(("talk", day, turn), f"Turn {turn}")
                suffix = _fb(pending_fb, ("TALK", e["agent"]))
                pending_fb.pop(("TALK", e["agent"]), None)
                out.append(f"  {agent_name(e['agent'])}: {e['text']}{suffix}")
            elif kind in ("vote", "exile", "tiebreak", "attack", "divine"):
                open_section(("night", e["day"]), f"Night {e['day']}")
                if kind == "vote":
                    votes.append(e)
                    suffix = _fb(pending_fb, ("VOTE", e["voter"]))
                    pending_fb.pop(("VOTE", e["voter"]), None)
                    out.append(f"  Vote: {agent_name(e['voter'])} -> {agent_name(e['target'])}{suffix}")
                elif kind == "tiebreak":
                    names = ", ".join(agent_name(a) for a in e["candidates"])
                    out.append(f"  Tie-break: {names} -> {agent_name(e['chosen'])}")
                elif kind == "exile":
                    counts = Counter(v["target"] for v in votes)
                    tally = ", ".join(
                        f"{agent_name(a)}={c}" for a, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
                    )
                    votes = []
                    out.append(f"  Tally: {tally}")
                    out.append(f"  Exiled: {agent_name(e['agent'])}")
                elif kind == "attack":
                    suffix = _fb(pending_fb, ("ATTACK", e["attacker"]))
                    pending_fb.pop(("ATTACK", e["attacker"]), None)
                    out.append(f"  Attack: {agent_name(e['attacker'])} -> {agent_name(e['victim'])}{suffix}")
                else:
                    suffix = _fb(pending_fb, ("DIVINE", e["seer"]))
                    pending_fb.pop(("DIVINE", e["seer"]), None)
                    out.append(
                        f"  Divine: {agent_name(e['seer'])} -> {agent_name(e['target'])} ({e['result']}){suffix}"
                    )
            elif kind == "outcome":
                out.append(f"Outcome: {e['winner']} team wins ({e['reason']})")
            elif kind == "aborted":
                out.append(f"ABORTED: {e['reason']}")
        except (KeyError, TypeError, GameError) as exc:
            raise LogParseError(i, f"cannot render {kind} event: {exc}") from exc
    return "\n".join(out) + "\n"


_HEAD_RE = re.compile(r"^Game seed=(-?\d+) talk_turns=(\d+) lang=(\S+)$")
_ROLE_RE = re.compile(r"Agent\[0([1-5])\]=(\w+)")
_AGENT = r"Agent\[0([1-5])\]"
_TALK_RE = re.compile(rf"^  {_AGENT}: (.*)$")
_VOTE_RE = re.compile(rf"^  Vote: {_AGENT} -> {_AGENT}$")
_TIE_RE = re.compile(rf"^  Tie-break: (.*) -> {_AGENT}$")
_EXILE_RE = re.compile(rf"^  Exiled: {_AGENT}$")
_ATTACK_RE = re.compile(rf"^  Attack: {_AGENT} -> {_AGENT}$")
_DIVINE_RE = re.compile(rf"^  Divine: {_AGENT} -> {_AGENT} \((human|werewolf)\)$")
_OUTCOME_RE = re.compile(r"^Outcome: (\w+) team wins \((\w+)\)$")


def parse_transcript(text: str) -> GameLog:
    """Inverse of ``render_replay``. Errors name the offending line number."""
    lines = text.splitlines()
    if len(lines) < 2:
        raise LogParseError(0, "transcript too short")
    m = _HEAD_RE.match(lines[0])
    if not m:
        raise LogParseError(0, "bad header line")
    config = GameConfig(talk_turns_per_day=int(m[2]), rng_seed=int(m[1]), language_pack=m[3])
    assignment = {int(a): Role(r) for a, r in _ROLE_RE.findall(lines[1])}
    actions: list[dict] = []
    tail: list[dict] = []
    day, turn = 0, 0

    def add(kind: str, fallback: Optional[str], request: str, actor: int, **fields: Any) -> None:
        if fallback is not None:
            actions.append({"type": "fallback", "day": fields["day"], "agent": actor, "request": request, "reason": fallback})
        if kind != "exile" and kind != "tiebreak":
            fields["fallback"] = fallback is not None
        actions.append({"type": kind, **fields})

    for n, raw in enumerate(lines[2:], start=2):
        line, fallback = raw, None
        fm = _FALLBACK_SUFFIX.match(raw)
        if fm:
            line, fallback = fm[1], fm[2]
        if (m := re.match(r"^== Day (\d+) ==$", line)):
            day = int(m[1])
        elif line == "Greetings":
            day, turn = 0, 0
        elif (m := re.match(r"^Turn (\d+)$", line)):
            turn = int(m[1])
        elif (m := re.match(r"^Night (\d+)$", line)):
            day = int(m[1])
        elif (m := _VOTE_RE.match(line)):
            add("vote", fallback, "VOTE", int(m[1]), day=day, voter=int(m[1]), target=int(m[2]))
        elif line.startswith("  Tally: "):
            pass  # derived from the votes
        elif (m := _TIE_RE.match(line)):
            cands = [int(a) for a in re.findall(_AGENT, m[1])]
            add("tiebreak", None, "", 0, day=day, candidates=cands, chosen=int(m[2]))
        elif (m := _EXILE_RE.match(line)):
            add("exile", None, "", 0, day=day, agent=int(m[1]))
        elif (m := _ATTACK_RE.match(line)):
            add("attack", fallback, "ATTACK", int(m[1]), day=day, attacker=int(m[1]), victim=int(m[2]))
        elif (m := _DIVINE_RE.match(line)):
            add("divine", fallback, "DIVINE", int(m[1]), day=day, seer=int(m[1]), target=int(m[2]), result=m[3])
        elif (m := _TALK_RE.match(raw)):
            # talk text is free-form, so only a trailing marker counts as a fallback
            text, fb = (fm[1], fm[2]) if fm else (raw, None)
            tm = _TALK_RE.match(text)
            add("talk", fb, "TALK", int(tm[1]), day=day, turn=turn, agent=int(tm[1]), text=tm[2])
        elif (m := _OUTCOME_RE.match(line)):
            tail.append({"type": "outcome", "winner": m[1], "reason": m[2]})
        elif raw.startswith("ABORTED: "):
            tail.append({"type": "aborted", "reason": raw[len("ABORTED: "):]})
        else:
            raise LogParseError(n, f"unrecognized transcript line {raw!r}")
    try:
        return rebuild_log(config, assignment, actions, tail)
    except GameError as exc:
        raise LogParseError(len(lines), f"transcript does not replay: {exc}") from exc
