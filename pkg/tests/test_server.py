import socket
import threading
import time

import pytest

from wolfarena.agent import LLMAgent, RandomAgent
from wolfarena.backend import ScriptedBackend
from wolfarena.game import AGENT_IDS, GameConfig, ProtocolViolation, Role
from wolfarena.protocol import GameInfoView, Packet, RequestKind, encode_response
from wolfarena.server import (
    SocketTransport,
    TransportTimeout,
    local_slots,
    run_agent_connection,
    run_game,
    serve,
)

from .conftest import assignment_of, play_scripted

STANDARD = assignment_of(Role.VILLAGER, Role.SEER, Role.POSSESSED, Role.VILLAGER, Role.WEREWOLF)


class Spy(RandomAgent):
    """Random agent that keeps every packet it receives."""

    def __init__(self, seed=0):
        super().__init__(seed)
        self.packets = []

    def handle(self, packet):
        self.packets.append(packet)
        return super().handle(packet)


class Hangup(Spy):
    """Disconnects once the given request kind shows up on the given day."""

    def __init__(self, kind, day, seed=0):
        super().__init__(seed)
        self.kind, self.day = kind, day
        self.gone = False

    def handle(self, packet):
        if self.gone or (packet.request is self.kind and packet.game_info.day >= self.day):
            self.gone = True
            raise ConnectionResetError("peer went away")
        return super().handle(packet)


class Garbler(RandomAgent):
    def handle(self, packet):
        answer = super().handle(packet)
        if packet.request in (RequestKind.VOTE, RequestKind.ATTACK, RequestKind.DIVINE):
            return "I refuse to name anyone"
        return answer


class Sleepy(RandomAgent):
    def handle(self, packet):
        if packet.request is RequestKind.VOTE:
            time.sleep(0.05)
        return super().handle(packet)


class Crashy(RandomAgent):
    def handle(self, packet):
        if packet.request is RequestKind.TALK:
            raise RuntimeError("bug in agent")
        return super().handle(packet)


def _game(agents, seed=1, assignment=STANDARD, deadline_ms=60_000):
    return run_game(GameConfig(rng_seed=seed), local_slots(agents, deadline_ms=deadline_ms), assignment)


class TestScriptedGame:
    def test_completes_without_fallbacks(self):
        game_log, _, _ = play_scripted(4)
        assert game_log.outcome is not None
        assert game_log.fallback_count == 0
        assert not game_log.aborted

    def test_each_turn_every_alive_agent_speaks_once(self):
        game_log, _, _ = play_scripted(6)
        phases = game_log.of_type("phase")
        alive_by_day = {}
        for p in phases:
            if p["phase"] == "DAY_TALK":
                alive_by_day.setdefault(p["day"], p["alive"])
        talks = {}
        for t in game_log.of_type("talk"):
            talks.setdefault((t["day"], t["turn"]), []).append(t["agent"])
        for (day, turn), speakers in talks.items():
            if day > 0:
                assert sorted(speakers) == alive_by_day[day]

    def test_villager_makes_two_calls_per_turn(self):
        game_log, backend, _ = play_scripted(2, assignment=STANDARD)
        day1_talk = [r for r, _ in backend.recorded_calls() if r.tags["agent"] == 1 and r.tags["day"] == 1
                     and r.tags["kind"] == "TALK"]
        assert len(day1_talk) == 2 * 5

    def test_werewolf_makes_no_vote_calls(self):
        _, backend, _ = play_scripted(2, assignment=STANDARD)
        wolf_vote_calls = [r for r, _ in backend.recorded_calls() if r.tags["agent"] == 5 and r.tags["kind"] == "VOTE"]
        assert wolf_vote_calls == []


class TestVisibility:
    def test_last_speaker_sees_prior_utterances(self):
        spies = [Spy(seed=i) for i in range(5)]
        _game(spies)
        seen = False
        for spy in spies:
            for p in spy.packets:
                if p.request is RequestKind.TALK and p.game_info.day == 1:
                    same_turn = [t for t in p.game_info.talk_list if t.day == 1 and t.turn == p.turn]
                    assert len(same_turn) <= 4
                    seen = seen or len(same_turn) == 4
        assert seen

    def test_dead_agents_get_no_action_requests(self):
        spies = [Spy(seed=i) for i in range(5)]
        for seed in range(10):
            game_log = _game(spies, seed=seed)
            exiled = {e["agent"]: e["day"] for e in game_log.of_type("exile")}
            attacked = {e["victim"]: e["day"] for e in game_log.of_type("attack")}
            for agent_id, spy in zip(AGENT_IDS, spies):
                death = min(exiled.get(agent_id, 99), attacked.get(agent_id, 99))
                for p in spy.packets:
                    if p.request in (RequestKind.TALK, RequestKind.VOTE, RequestKind.ATTACK, RequestKind.DIVINE):
                        assert p.game_info.day <= death
                spy.packets.clear()

    def test_news_of_the_night(self):
        spies = [Spy(seed=i) for i in range(5)]
        for seed in range(20):
            game_log = _game(spies, seed=seed)
            attacks = game_log.of_type("attack")
            if attacks:
                victim = attacks[0]["victim"]
                exiled = game_log.of_type("exile")[0]["agent"]
                day2 = [p for s in spies for p in s.packets if p.request is RequestKind.TALK and p.game_info.day == 2]
                assert day2
                assert all(p.game_info.attacked == victim and p.game_info.executed == exiled for p in day2)
                return
        pytest.fail("no game reached day 2")


class TestFallbacks:
    def test_disconnect_mid_game(self):
        agents = [RandomAgent(0), Hangup(RequestKind.TALK, 1), RandomAgent(2), RandomAgent(3), RandomAgent(4)]
        game_log = _game(agents)
        assert game_log.outcome is not None
        reasons = {(e["agent"], e["reason"]) for e in game_log.of_type("fallback")}
        assert (2, "disconnected") in reasons
        talks = [t for t in game_log.of_type("talk") if t["agent"] == 2 and t["day"] >= 1]
        assert all(t["fallback"] and t["text"] == "Skip" for t in talks)

    def test_malformed_action_answers(self):
        agents = [Garbler(i) for i in range(5)]
        game_log = _game(agents)
        assert game_log.outcome is not None
        for v in game_log.of_type("vote"):
            assert v["fallback"]
        assert all(e["reason"].startswith("malformed") for e in game_log.of_type("fallback"))

    def test_timeout(self):
        agents = [Sleepy(i) for i in range(5)]
        game_log = _game(agents, deadline_ms=10)
        assert game_log.outcome is not None
        assert {e["reason"] for e in game_log.of_type("fallback")} == {"timeout"}

    def test_agent_exception_during_talk(self):
        agents = [RandomAgent(0), Crashy(1), RandomAgent(2), RandomAgent(3), RandomAgent(4)]
        game_log = _game(agents)
        assert game_log.outcome is not None
        assert any(e["agent"] == 2 and e["reason"].startswith("agent error") for e in game_log.of_type("fallback"))

    def test_fallback_target_is_legal(self):
        agents = [Garbler(i) for i in range(5)]
        for seed in range(20):
            game_log = _game(agents, seed=seed, assignment=None)
            for v in game_log.of_type("vote"):
                assert v["target"] != v["voter"]


def test_slot_ids_checked():
    slots = local_slots([RandomAgent() for _ in range(4)])
    with pytest.raises(ProtocolViolation):
        run_game(GameConfig(), slots)


def test_local_transport_wire_and_direct_agree():
    a = run_game(GameConfig(rng_seed=5), local_slots([RandomAgent(i) for i in range(5)], wire=True))
    b = run_game(GameConfig(rng_seed=5), local_slots([RandomAgent(i) for i in range(5)], wire=False))
    assert a.dumps() == b.dumps()


class TestSockets:
    def test_stale_answer_is_discarded(self):
        server_sock, agent_sock = socket.socketpair()
        transport = SocketTransport(server_sock)
        view = GameInfoView(1, "NightVote(1)", 1, Role.VILLAGER, {a: "ALIVE" for a in AGENT_IDS})
        packet = Packet(RequestKind.VOTE, view)
        with pytest.raises(TransportTimeout):
            transport.request(packet, 0.05)
        agent_sock.sendall(encode_response("Agent[02]"))  # late answer to the first request
        agent_sock.sendall(encode_response("Agent[03]"))
        assert transport.request(packet, 1.0) == b"Agent[03]\n"
        transport.close()
        agent_sock.close()

    def test_serve_matches_local_run(self, tmp_path):
        ports = []
        ready = threading.Event()

        def on_ready(port):
            ports.append(port)
            ready.set()

        result = {}

        def server():
            result["logs"] = serve("127.0.0.1", 0, seed=11, log_dir=tmp_path, games=2, ready=on_ready, timeout_ms=20_000)

        st = threading.Thread(target=server)
        st.start()
        assert ready.wait(5)
        clients = []
        for _ in range(5):
            agent = LLMAgent(ScriptedBackend.default(), seed=3, retry_delay=0)
            t = threading.Thread(target=run_agent_connection, args=("127.0.0.1", ports[0], agent))
            t.start()
            clients.append(t)
            time.sleep(0.02)  # keep connection order stable
        st.join(30)
        for t in clients:
            t.join(5)
        logs = result["logs"]
        assert len(logs) == 2
        assert len(list(tmp_path.glob("*.jsonl"))) == 2
        for i, game_log in enumerate(logs):
            local_agents = [LLMAgent(ScriptedBackend.default(), seed=3, retry_delay=0) for _ in range(5)]
            local = run_game(GameConfig(rng_seed=11 + i), local_slots(local_agents))
            assert game_log.dumps() == local.dumps()
            assert game_log.fallback_count == 0
