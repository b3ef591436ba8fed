"""LLM-driven player.

Before every utterance and every vote the agent asks the model for a
situation analysis, then conditions the next prompt on it. The werewolf
additionally picks a vote target at talk turn 3 and spends turns 3-5 on
logical, credibility and emotional persuasion toward that target, then votes
and attacks accordingly.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..backend import BackendError, ChatBackend, ChatRequest, complete_with_retry
from ..game import (
    AGENT_IDS,
    DivineRecord,
    ProtocolViolation,
    Role,
    Species,
    TalkEntry,
    agent_name,
    last_agent_mention,
)
from ..protocol import SKIP, GameInfoView, Packet, RequestKind
from .prompts import (
    PERSUASION_SCHEDULE,
    LanguagePack,
    PersuasionStrategy,
    format_divinations,
    format_history,
    load_language_pack,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SituationAnalysis:
    text: str
    vote_target: Optional[int]
    produced_at: tuple[int, int]


EMPTY_ANALYSIS = SituationAnalysis("", None, (0, 0))


@dataclass
class PersuasionPlan:
    target: int
    day: int
    schedule: dict[int, PersuasionStrategy] = field(default_factory=lambda: dict(PERSUASION_SCHEDULE))


@dataclass
class AgentContext:
    self_id: int
    role: Role
    seed: int = 0
    day: int = 0
    alive: list[int] = field(default_factory=lambda: list(AGENT_IDS))
    dialogue_history: list[TalkEntry] = field(default_factory=list)
    divine_results: list[DivineRecord] = field(default_factory=list)
    latest_analysis: Optional[SituationAnalysis] = None
    persuasion_plan: Optional[PersuasionPlan] = None
    fallbacks: list[str] = field(default_factory=list)

    def rng_for(self, label: str) -> random.Random:
        # one independent stream per decision, so each draw is reproducible from the seed alone
        return random.Random(f"{self.seed}:{self.self_id}:{label}")

    def others_alive(self) -> list[int]:
        return [a for a in self.alive if a != self.self_id]

    def note_fallback(self, what: str) -> None:
        log.info("%s fallback: %s", agent_name(self.self_id), what)
        self.fallbacks.append(what)


def fabricate_divination(ctx: AgentContext, rng: random.Random) -> DivineRecord:
    """The possessed's fake night-0 result. Drawn once, then reused."""
    if ctx.role is not Role.POSSESSED:
        raise ProtocolViolation("only the possessed fabricates divinations")
    if ctx.divine_results:
        return ctx.divine_results[0]
    target = rng.choice([a for a in AGENT_IDS if a != ctx.self_id])
    result = rng.choice([Species.HUMAN, Species.WEREWOLF])
    record = DivineRecord(0, ctx.self_id, target, result)
    ctx.divine_results.append(record)
    return record


def decide_attack(ctx: AgentContext, alive_after_vote: set[int]) -> int:
    plan = ctx.persuasion_plan
    if plan is not None and plan.target in alive_after_vote and plan.target != ctx.self_id:
        return plan.target
    candidates = sorted(a for a in alive_after_vote if a != ctx.self_id)
    if not candidates:
        raise ProtocolViolation("nobody left to attack")
    return ctx.rng_for(f"attack:{ctx.day}").choice(candidates)


def decide_divine(ctx: AgentContext, rng: Optional[random.Random] = None) -> int:
    rng = rng or ctx.rng_for(f"divine:{ctx.day}")
    seen = {d.target for d in ctx.divine_results}
    others = ctx.others_alive()
    fresh = [a for a in others if a not in seen]
    return rng.choice(fresh or others)


def _one_utterance(text: str) -> str:
    flat = " ".join(text.split()).strip().strip('"').strip()
    return flat or SKIP


class LLMAgent:
    """One seat's player. ``handle`` takes a packet and returns the answer
    line content, or None for packets that need no answer."""

    def __init__(
        self,
        backend: ChatBackend,
        seed: int = 0,
        pack: Optional[LanguagePack] = None,
        temperature: float = 0.7,
        retries: int = 2,
        retry_delay: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.seed = seed
        self.pack = pack
        self.temperature = temperature
        self.retries = retries
        self.retry_delay = retry_delay
        self.sleep = sleep
        self.ctx: Optional[AgentContext] = None
        self._turn = 0

    # -- plumbing ---------------------------------------------------------

    def _pack(self) -> LanguagePack:
        if self.pack is None:
            self.pack = load_language_pack("en")
        return self.pack

    def _ask(self, prompt: str, stage: str, kind: RequestKind) -> str:
        ctx = self.ctx
        request = ChatRequest(
            system_text=self._pack().text("system"),
            user_text=prompt,
            temperature=self.temperature,
            tags={
                "agent": ctx.self_id,
                "role": ctx.role.value,
                "kind": kind.value,
                "stage": stage,
                "day": ctx.day,
                "turn": self._turn,
            },
        )
        response = complete_with_retry(
            self.backend, request, retries=self.retries, base_delay=self.retry_delay, sleep=self.sleep
        )
        return response.text

    def _task(self, with_target_instruction: bool = False) -> str:
        ctx = self.ctx
        pack = self._pack()
        status = f"You are {agent_name(ctx.self_id)}. It is Day {ctx.day}"
        status += f", talk turn {self._turn}." if self._turn else "."
        others = ", ".join(agent_name(a) for a in ctx.others_alive())
        parts = [pack.task(ctx.role), status, f"Other surviving players: {others}"]
        if with_target_instruction:
            parts.append(pack.text("target_instruction"))
        return "\n".join(parts)

    def _uses_divination(self) -> bool:
        return self.ctx.role in (Role.SEER, Role.POSSESSED)

    def _base_bindings(self, with_target_instruction: bool = False) -> dict[str, str]:
        bindings = {
            "TASK_DESCRIPTION": self._task(with_target_instruction),
            "GAME_RULES": self._pack().text("rules"),
            "DIALOGUE_HISTORY": format_history(self.ctx.dialogue_history),
        }
        if self._uses_divination():
            bindings["DIVINATION_RESULT"] = format_divinations(self.ctx.divine_results)
        return bindings

    def _variant(self, base: str) -> str:
        return f"{base}_divination" if self._uses_divination() else base

    def _update(self, info: GameInfoView) -> None:
        ctx = self.ctx
        if info.self_id != ctx.self_id or info.self_role is not ctx.role:
            raise ProtocolViolation("packet addressed to another agent")
        if info.day != ctx.day:
            ctx.day = info.day
            if ctx.persuasion_plan is not None and ctx.persuasion_plan.day != info.day:
                ctx.persuasion_plan = None
        ctx.alive = info.alive_agents()
        ctx.dialogue_history = list(info.talk_list)
        if ctx.role is Role.SEER:
            ctx.divine_results = list(info.my_divine_results)

    def _cot(self, prompt: str) -> str:
        return f"{prompt}\n{self._pack().text('cot_cue')}"

    # -- pipeline stages ----------------------------------------------------

    def render_analysis_prompt(self) -> str:
        want_target = self.ctx.role is Role.WEREWOLF
        bindings = self._base_bindings(with_target_instruction=want_target)
        return self._cot(self._pack().template(self._variant("analysis")).render(bindings))

    def analyze_situation(self, kind: RequestKind = RequestKind.TALK) -> SituationAnalysis:
        ctx = self.ctx
        prompt = self.render_analysis_prompt()
        try:
            text = self._ask(prompt, "analysis", kind)
        except BackendError as exc:
            ctx.note_fallback(f"analysis failed ({exc}); reusing previous analysis")
            return ctx.latest_analysis or EMPTY_ANALYSIS
        target = last_agent_mention(text)
        if target not in ctx.others_alive():
            target = None
        analysis = SituationAnalysis(text.strip(), target, (ctx.day, self._turn))
        ctx.latest_analysis = analysis
        return analysis

    def render_response_prompt(self, analysis: SituationAnalysis) -> str:
        bindings = self._base_bindings()
        bindings["CONDITION_ANALYSIS"] = analysis.text or "(no analysis available)"
        return self._pack().template(self._variant("response")).render(bindings)

    def generate_response(self, analysis: SituationAnalysis) -> str:
        prompt = self.render_response_prompt(analysis)
        try:
            return _one_utterance(self._ask(prompt, "talk", RequestKind.TALK))
        except BackendError as exc:
            self.ctx.note_fallback(f"response failed ({exc}); skipping")
            return SKIP

    def ensure_plan(self, analysis: SituationAnalysis) -> PersuasionPlan:
        ctx = self.ctx
        plan = ctx.persuasion_plan
        if plan is not None and plan.day == ctx.day:
            return plan
        target = analysis.vote_target if analysis.produced_at == (ctx.day, self._turn) else None
        if target is None:
            target = ctx.rng_for(f"target:{ctx.day}").choice(ctx.others_alive())
            ctx.note_fallback(f"no target from analysis; picked {agent_name(target)}")
        ctx.persuasion_plan = PersuasionPlan(target=target, day=ctx.day)
        return ctx.persuasion_plan

    def render_persuasion_prompt(self, strategy: PersuasionStrategy, target: int, analysis: SituationAnalysis) -> str:
        pack = self._pack()
        bindings = self._base_bindings()
        bindings["CONDITION_ANALYSIS"] = analysis.text or "(no analysis available)"
        bindings["VOTE_TARGET"] = agent_name(target)
        bindings["PERSUASION_EXAMPLES"] = pack.bank(strategy).render(target)
        return pack.template(f"persuasion_{strategy.value}").render(bindings)

    def generate_persuasive_response(self, turn: int, analysis: SituationAnalysis) -> str:
        ctx = self.ctx
        if ctx.role is not Role.WEREWOLF:
            raise ProtocolViolation("only the werewolf persuades")
        strategy = PERSUASION_SCHEDULE[turn]
        plan = self.ensure_plan(analysis)
        prompt = self.render_persuasion_prompt(strategy, plan.target, analysis)
        try:
            return _one_utterance(self._ask(prompt, "persuasion", RequestKind.TALK))
        except BackendError as exc:
            ctx.note_fallback(f"persuasion failed ({exc}); canned example")
            return self._pack().bank(strategy).substituted(plan.target)[0]

    def greet(self) -> str:
        bindings = {"TASK_DESCRIPTION": self._task(), "GAME_RULES": self._pack().text("rules")}
        prompt = self._pack().template("greeting").render(bindings)
        try:
            return _one_utterance(self._ask(prompt, "greeting", RequestKind.TALK))
        except BackendError as exc:
            self.ctx.note_fallback(f"greeting failed ({exc}); skipping")
            return SKIP

    def _random_vote(self, why: str) -> int:
        ctx = self.ctx
        target = ctx.rng_for(f"vote:{ctx.day}").choice(ctx.others_alive())
        ctx.note_fallback(f"{why}; voting {agent_name(target)}")
        return target

    def decide_vote(self) -> int:
        ctx = self.ctx
        if ctx.role is Role.WEREWOLF:
            plan = ctx.persuasion_plan
            if plan is not None and plan.day == ctx.day and plan.target in ctx.others_alive():
                return plan.target
            return self._random_vote("no persuasion target for today")
        analysis = self.analyze_situation(RequestKind.VOTE)
        bindings = self._base_bindings()
        bindings["CONDITION_ANALYSIS"] = analysis.text or "(no analysis available)"
        prompt = self._cot(self._pack().template(self._variant("vote")).render(bindings))
        try:
            text = self._ask(prompt, "vote", RequestKind.VOTE)
        except BackendError as exc:
            return self._random_vote(f"vote call failed ({exc})")
        target = last_agent_mention(text)
        if target not in ctx.others_alive():
            return self._random_vote("no legal target in vote answer")
        return target

    # -- dispatch -----------------------------------------------------------

    def handle(self, packet: Packet) -> Optional[str]:
        info = packet.game_info
        kind = packet.request
        if kind is RequestKind.INITIALIZE:
            self.ctx = AgentContext(self_id=info.self_id, role=info.self_role, seed=self.seed)
            self._turn = 0
            self._update(info)
            if self.ctx.role is Role.POSSESSED:
                fabricate_divination(self.ctx, self.ctx.rng_for("fabricate"))
            return None
        if self.ctx is None:
            raise ProtocolViolation(f"{kind.value} before INITIALIZE")
        if kind is RequestKind.FINISH:
            self._update(info)
            self.ctx = None
            return None
        self._update(info)
        ctx = self.ctx
        if kind is RequestKind.DAILY_INITIALIZE:
            self._turn = 0
            return None
        if kind is RequestKind.TALK:
            self._turn = packet.turn or 0
            if ctx.day == 0:
                return self.greet()
            analysis = self.analyze_situation()
            if ctx.role is Role.WEREWOLF and self._turn in PERSUASION_SCHEDULE:
                return self.generate_persuasive_response(self._turn, analysis)
            return self.generate_response(analysis)
        self._turn = 0
        if kind is RequestKind.VOTE:
            return agent_name(self.decide_vote())
        if kind is RequestKind.ATTACK:
            if ctx.role is not Role.WEREWOLF:
                raise ProtocolViolation(f"{ctx.role.value} cannot attack")
            return agent_name(decide_attack(ctx, set(ctx.alive)))
        if kind is RequestKind.DIVINE:
            if ctx.role is not Role.SEER:
                raise ProtocolViolation(f"{ctx.role.value} cannot divine")
            return agent_name(decide_divine(ctx))
        raise ProtocolViolation(f"unknown request {kind!r}")
