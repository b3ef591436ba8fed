"""Self-play tournaments: seat setup, role rotation, seeding and persistence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .agent import LLMAgent, RandomAgent
from .backend import ChatBackend, make_backend
from .game import AGENT_IDS, GameConfig, Role
from .gamelog import GameLog
from .server import DEFAULT_DEADLINE_MS, GameRunner, PacketAgent, local_slots

log = logging.getLogger(__name__)

ROTATION_BASE: tuple[Role, ...] = (Role.WEREWOLF, Role.SEER, Role.POSSESSED, Role.VILLAGER, Role.VILLAGER)


def rotation_assignment(game_index: int) -> dict[int, Role]:
    """Latin-square rotation: over any 5 consecutive games each seat holds
    every slot of the role list exactly once."""
    return {seat: ROTATION_BASE[(seat - 1 + game_index) % 5] for seat in AGENT_IDS}


@dataclass
class TournamentConfig:
    n_games: int
    seed: int = 0
    rotate: bool = True
    seat_backends: tuple[str, ...] = ("scripted:default",) * 5
    talk_turns: int = 5
    log_dir: Optional[Path] = None
    deadline_ms: int = DEFAULT_DEADLINE_MS
    api_url: Optional[str] = None
    api_key_env: str = "OPENAI_API_KEY"
    model: str = "gpt-4o-2024-05-13"
    retry_delay: float = 1.0
    wire: bool = True

    def __post_init__(self) -> None:
        if len(self.seat_backends) == 1:
            self.seat_backends = tuple(self.seat_backends) * 5
        if len(self.seat_backends) != 5:
            raise ValueError("give one backend spec, or one per seat")

    def game_seed(self, index: int) -> int:
        return self.seed + index


@dataclass
class TournamentResult:
    logs: list[GameLog] = field(default_factory=list)
    paths: list[Path] = field(default_factory=list)

    @property
    def aborted(self) -> list[GameLog]:
        return [lg for lg in self.logs if lg.aborted]

    @property
    def completed(self) -> list[GameLog]:
        return [lg for lg in self.logs if not lg.aborted]


def build_agents(cfg: TournamentConfig, seed: int) -> list[PacketAgent]:
    """One agent per seat; seats sharing a scripted spec share one backend."""
    backends: dict[str, ChatBackend] = {}
    agents: list[PacketAgent] = []
    for spec in cfg.seat_backends:
        if spec == "random":
            agents.append(RandomAgent(seed))
            continue
        if spec not in backends:
            backends[spec] = make_backend(spec, cfg.api_url, cfg.api_key_env, cfg.model)
        agents.append(LLMAgent(backends[spec], seed=seed, retry_delay=cfg.retry_delay))
    return agents


def play_one(
    cfg: TournamentConfig,
    index: int,
    agents: Optional[Sequence[PacketAgent]] = None,
) -> GameLog:
    seed = cfg.game_seed(index)
    config = GameConfig(talk_turns_per_day=cfg.talk_turns, rng_seed=seed)
    agents = agents if agents is not None else build_agents(cfg, seed)
    assignment = rotation_assignment(index) if cfg.rotate else None
    runner = GameRunner(config, local_slots(agents, wire=cfg.wire, deadline_ms=cfg.deadline_ms), assignment)
    runner.log.seat_labels = {seat: spec for seat, spec in zip(AGENT_IDS, cfg.seat_backends)}
    try:
        return runner.run()
    except Exception as exc:
        log.warning("game %d (seed %d) aborted: %s", index, seed, exc)
        runner.log.append("aborted", reason=f"{type(exc).__name__}: {exc}")
        return runner.log


def run_tournament(
    cfg: TournamentConfig,
    agent_factory: Optional[Callable[[int, int], Sequence[PacketAgent]]] = None,
) -> TournamentResult:
    """Play ``cfg.n_games`` games in-process, one after another.

    *agent_factory(index, seed)* overrides seat construction, mostly for tests.
    """
    result = TournamentResult()
    for i in range(cfg.n_games):
        agents = agent_factory(i, cfg.game_seed(i)) if agent_factory else None
        game_log = play_one(cfg, i, agents)
        result.logs.append(game_log)
        if cfg.log_dir is not None:
            path = Path(cfg.log_dir) / f"game_{i:04d}.jsonl"
            result.paths.append(game_log.write(path))
    if result.aborted:
        log.warning("%d of %d games aborted; they are excluded from win rates", len(result.aborted), cfg.n_games)
    return result


def load_logs(log_dir: Path) -> list[GameLog]:
    return [GameLog.read(p) for p in sorted(Path(log_dir).glob("*.jsonl"))]
