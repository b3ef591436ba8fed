"""Game orchestration: drives the rules engine, talks to five agents through
transports, applies timeout/malformed-answer fallbacks and records the log."""

from __future__ import annotations

import logging
import random
import socket
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from .game import (
    AGENT_IDS,
    AttackDone,
    AttackRecord,
    DivineDone,
    DivineRecord,
    GameConfig,
    GameState,
    PhaseKind,
    PhaseEvent,
    ProtocolViolation,
    Role,
    TalkDone,
    TalkEntry,
    VoteDone,
    VoteRecord,
    assign_roles,
    divine,
    speaking_order,
    step_phase,
    tally_votes,
    top_candidates,
)
from .gamelog import GameLog
from .protocol import (
    SKIP,
    MalformedResponse,
    Packet,
    RequestKind,
    build_game_info_view,
    decode_packet,
    decode_response,
    encode_packet,
    encode_response,
)

log = logging.getLogger(__name__)

DEFAULT_DEADLINE_MS = 60_000


class TransportTimeout(Exception):
    pass


class TransportClosed(Exception):
    pass


class Transport(Protocol):
    def send(self, packet: Packet) -> None: ...

    def request(self, packet: Packet, timeout_s: float) -> bytes: ...

    def close(self) -> None: ...


class PacketAgent(Protocol):
    def handle(self, packet: Packet) -> Optional[str]: ...


class LocalTransport:
    """In-process transport. With ``wire=True`` every packet is encoded and
    decoded on the way, exactly as it would be over a socket."""

    def __init__(self, agent: PacketAgent, wire: bool = True):
        self.agent = agent
        self.wire = wire

    def _deliver(self, packet: Packet) -> Optional[str]:
        if self.wire:
            packet = decode_packet(encode_packet(packet))
        try:
            return self.agent.handle(packet)
        except ConnectionError as exc:
            raise TransportClosed(str(exc)) from exc

    def send(self, packet: Packet) -> None:
        self._deliver(packet)

    def request(self, packet: Packet, timeout_s: float) -> bytes:
        start = time.monotonic()
        answer = self._deliver(packet)
        if time.monotonic() - start > timeout_s:
            raise TransportTimeout(f"answer took longer than {timeout_s:.1f}s")
        return encode_response(answer or "")

    def close(self) -> None:
        pass


class LineSocket:
    """Newline framing over a stream socket with per-read deadlines."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = b""

    def write_line(self, data: bytes) -> None:
        if not data.endswith(b"\n"):
            data += b"\n"
        self.sock.sendall(data)

    def read_line(self, timeout_s: Optional[float] = None) -> bytes:
        deadline = None if timeout_s is None else time.monotonic() + timeout_s
        while b"\n" not in self._buf:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TransportTimeout("no answer before the deadline")
                self.sock.settimeout(remaining)
            else:
                self.sock.settimeout(None)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise TransportTimeout("no answer before the deadline") from None
            except OSError as exc:
                raise TransportClosed(str(exc)) from exc
            if not chunk:
                raise TransportClosed("peer closed the connection")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line + b"\n"

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class SocketTransport:
    def __init__(self, sock: socket.socket):
        self.lines = LineSocket(sock)
        # answers that arrived too late are still in the stream, in order
        self._stale = 0

    def send(self, packet: Packet) -> None:
        try:
            self.lines.write_line(encode_packet(packet))
        except OSError as exc:
            raise TransportClosed(str(exc)) from exc

    def request(self, packet: Packet, timeout_s: float) -> bytes:
        self.send(packet)
        deadline = time.monotonic() + timeout_s
        while True:
            try:
                line = self.lines.read_line(max(0.0, deadline - time.monotonic()))
            except TransportTimeout:
                self._stale += 1
                raise
            if self._stale:
                self._stale -= 1
                continue
            return line

    def close(self) -> None:
        self.lines.close()


@dataclass
class ConnectionSlot:
    agent_id: int
    transport: Transport
    deadline_ms: int = DEFAULT_DEADLINE_MS
    closed: bool = field(default=False)


class GameRunner:
    """State owner for one game. All transitions go through ``step_phase``."""

    def __init__(
        self,
        config: GameConfig,
        slots: Sequence[ConnectionSlot],
        assignment: Optional[dict[int, Role]] = None,
    ):
        ids = sorted(s.agent_id for s in slots)
        if ids != list(AGENT_IDS):
            raise ProtocolViolation(f"need exactly five slots with ids 1..5, got {ids}")
        self.slots = {s.agent_id: s for s in slots}
        self.rng = random.Random(config.rng_seed)
        assignment = assignment or assign_roles(config, self.rng)
        self.state = GameState.new(config, assignment)
        self.log = GameLog(config, dict(assignment))

    # -- transport helpers ---------------------------------------------------

    def _fallback(self, agent: int, kind: RequestKind, reason: str) -> None:
        log.info("agent %d %s fallback: %s", agent, kind.value, reason)
        self.log.append("fallback", day=self.state.phase.day, agent=agent, request=kind.value, reason=reason)

    def _send(self, agent: int, kind: RequestKind) -> None:
        slot = self.slots[agent]
        if slot.closed:
            return
        packet = Packet(kind, build_game_info_view(self.state, agent))
        try:
            slot.transport.send(packet)
        except TransportClosed:
            slot.closed = True
        except Exception as exc:  # a broken agent must not abort the game
            log.warning("agent %d failed on %s: %s", agent, kind.value, exc)

    def _ask(self, agent: int, packet: Packet) -> tuple[Optional[bytes], str]:
        slot = self.slots[agent]
        if slot.closed:
            return None, "disconnected"
        try:
            return slot.transport.request(packet, slot.deadline_ms / 1000), ""
        except TransportTimeout:
            return None, "timeout"
        except TransportClosed:
            slot.closed = True
            return None, "disconnected"
        except Exception as exc:
            return None, f"agent error: {type(exc).__name__}"

    def _ask_target(self, agent: int, kind: RequestKind, legal: Sequence[int]) -> tuple[int, bool]:
        packet = Packet(kind, build_game_info_view(self.state, agent))
        raw, reason = self._ask(agent, packet)
        if raw is not None:
            try:
                target = decode_response(kind, raw).target
                if target in legal:
                    return target, False
                reason = f"illegal target {target}"
            except MalformedResponse as exc:
                reason = f"malformed: {exc}"
        self._fallback(agent, kind, reason)
        return self.rng.choice(sorted(legal)), True

    # -- phases ----------------------------------------------------------------

    def _apply(self, event: PhaseEvent) -> None:
        self.state = step_phase(self.state, event)
        self._log_phase()

    def _log_phase(self) -> None:
        p = self.state.phase
        self.log.append("phase", phase=p.kind.value, day=p.day, turn=p.turn, alive=sorted(self.state.alive))

    def run_talk_round(self, day: int, turn: int) -> list[TalkEntry]:
        entries: list[TalkEntry] = []
        for agent in speaking_order(self.state.alive, self.rng):
            view = build_game_info_view(self.state, agent, pending_talk=entries)
            raw, reason = self._ask(agent, Packet(RequestKind.TALK, view, turn=turn))
            fallback = raw is None
            if fallback:
                self._fallback(agent, RequestKind.TALK, reason)
                text = SKIP
            else:
                text = decode_response(RequestKind.TALK, raw).text or SKIP
            entries.append(TalkEntry(day, turn, agent, text))
            self.log.append("talk", day=day, turn=turn, agent=agent, text=text, fallback=fallback)
        return entries

    def _divine_phase(self, day: int) -> None:
        seer = self.state.agent_with(Role.SEER)
        legal = sorted(a for a in self.state.alive if a != seer)
        target, fb = self._ask_target(seer, RequestKind.DIVINE, legal)
        record = DivineRecord(day, seer, target, divine(self.state.assignment, target))
        self.log.append("divine", day=day, seer=seer, target=target, result=record.result.value, fallback=fb)
        self._apply(DivineDone(day, record))

    def _vote_phase(self, day: int) -> None:
        votes = []
        for voter in sorted(self.state.alive):
            legal = sorted(a for a in self.state.alive if a != voter)
            target, fb = self._ask_target(voter, RequestKind.VOTE, legal)
            votes.append(VoteRecord(day, voter, target))
            self.log.append("vote", day=day, voter=voter, target=target, fallback=fb)
        tied = top_candidates(votes)
        exiled = tally_votes(votes, self.rng)
        if len(tied) > 1:
            self.log.append("tiebreak", day=day, candidates=tied, chosen=exiled)
        self.log.append("exile", day=day, agent=exiled)
        self._apply(VoteDone(day, tuple(votes), exiled))

    def _attack_phase(self, day: int) -> None:
        wolf = self.state.agent_with(Role.WEREWOLF)
        legal = sorted(a for a in self.state.alive if a != wolf)
        victim, fb = self._ask_target(wolf, RequestKind.ATTACK, legal)
        self.log.append("attack", day=day, attacker=wolf, victim=victim, fallback=fb)
        self._apply(AttackDone(day, AttackRecord(day, wolf, victim)))

    def run_night(self) -> None:
        """Vote, then attack, then divine, stopping as soon as the game ends."""
        phase = self.state.phase
        if phase.kind is not PhaseKind.NIGHT_VOTE:
            raise ProtocolViolation(f"run_night called during {phase}")
        day = phase.day
        self._vote_phase(day)
        if self.state.phase.kind is PhaseKind.NIGHT_ATTACK:
            self._attack_phase(day)
        if self.state.phase.kind is PhaseKind.NIGHT_DIVINE:
            self._divine_phase(day)

    def run(self) -> GameLog:
        self._log_phase()
        for agent in AGENT_IDS:
            self._send(agent, RequestKind.INITIALIZE)
        while not self.state.finished:
            phase = self.state.phase
            if phase.kind is PhaseKind.DAY0_GREETING:
                self._apply(TalkDone(0, 0, tuple(self.run_talk_round(0, 0))))
            elif phase.kind is PhaseKind.NIGHT0_DIVINE:
                self._divine_phase(0)
            elif phase.kind is PhaseKind.DAY_TALK:
                if phase.turn == 1:
                    for agent in sorted(self.state.alive):
                        self._send(agent, RequestKind.DAILY_INITIALIZE)
                entries = self.run_talk_round(phase.day, phase.turn)
                self._apply(TalkDone(phase.day, phase.turn, tuple(entries)))
            elif phase.kind is PhaseKind.NIGHT_VOTE:
                self.run_night()
            else:
                raise ProtocolViolation(f"unexpected phase {phase}")
        outcome = self.state.outcome
        self.log.append("outcome", winner=outcome.winner.value, reason=outcome.reason.value)
        for agent in AGENT_IDS:
            self._send(agent, RequestKind.FINISH)
        return self.log


def run_game(
    config: GameConfig,
    slots: Sequence[ConnectionSlot],
    assignment: Optional[dict[int, Role]] = None,
) -> GameLog:
    return GameRunner(config, slots, assignment).run()


def local_slots(agents: Sequence[PacketAgent], wire: bool = True, deadline_ms: int = DEFAULT_DEADLINE_MS) -> list[ConnectionSlot]:
    return [
        ConnectionSlot(i, LocalTransport(agent, wire=wire), deadline_ms)
        for i, agent in zip(AGENT_IDS, agents)
    ]


# -- networking ----------------------------------------------------------------


def accept_slots(server: socket.socket, deadline_ms: int) -> list[ConnectionSlot]:
    """Wait for five agents; ids follow connection order."""
    slots = []
    for agent_id in AGENT_IDS:
        conn, addr = server.accept()
        log.info("agent %d connected from %s", agent_id, addr)
        slots.append(ConnectionSlot(agent_id, SocketTransport(conn), deadline_ms))
    return slots


def serve(
    host: str,
    port: int,
    talk_turns: int = 5,
    seed: int = 0,
    timeout_ms: int = DEFAULT_DEADLINE_MS,
    log_dir: Optional[Path] = None,
    games: int = 1,
    ready: Optional[Callable[[int], None]] = None,
) -> list[GameLog]:
    logs = []
    with socket.create_server((host, port)) as server:
        if ready is not None:
            ready(server.getsockname()[1])
        slots = accept_slots(server, timeout_ms)
        try:
            for i in range(games):
                config = GameConfig(talk_turns_per_day=talk_turns, rng_seed=seed + i)
                game_log = run_game(config, slots)
                if log_dir is not None:
                    game_log.write(Path(log_dir) / f"game_{i:04d}_seed{seed + i}.jsonl")
                logs.append(game_log)
        finally:
            for slot in slots:
                slot.transport.close()
    return logs


def run_agent_connection(host: str, port: int, agent: PacketAgent) -> None:
    """Client loop: answer every packet that needs an answer until the server hangs up."""
    sock = socket.create_connection((host, port))
    lines = LineSocket(sock)
    try:
        while True:
            try:
                raw = lines.read_line()
            except TransportClosed:
                return
            packet = decode_packet(raw)
            answer = agent.handle(packet)
            if packet.request.needs_response:
                lines.write_line(encode_response(answer or ""))
    finally:
        lines.close()
