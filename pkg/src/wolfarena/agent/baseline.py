"""Model-free agents used to exercise the server and rules engine."""

from __future__ import annotations

import random
from typing import Optional

from ..game import agent_name
from ..protocol import SKIP, Packet, RequestKind


class RandomAgent:
    """Talks from a fixed phrase list and picks uniformly random legal targets."""

    PHRASES = (
        "Hello everyone.",
        "I have nothing to add yet.",
        "I am a villager, trust me.",
        SKIP,
    )

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.self_id: Optional[int] = None
        self._rng = random.Random(seed)

    def handle(self, packet: Packet) -> Optional[str]:
        info = packet.game_info
        if packet.request is RequestKind.INITIALIZE:
            self.self_id = info.self_id
            self._rng = random.Random(f"{self.seed}:{info.self_id}")
            return None
        if not packet.request.needs_response:
            return None
        if packet.request is RequestKind.TALK:
            return self._rng.choice(self.PHRASES)
        others = [a for a in info.alive_agents() if a != info.self_id]
        return agent_name(self._rng.choice(others))


class FixedVoteAgent(RandomAgent):
    """Random agent that always votes for one chosen agent when it can."""

    def __init__(self, vote_for: int, seed: int = 0):
        super().__init__(seed)
        self.vote_for = vote_for

    def handle(self, packet: Packet) -> Optional[str]:
        if packet.request is RequestKind.VOTE and self.vote_for != packet.game_info.self_id:
            return agent_name(self.vote_for)
        return super().handle(packet)
