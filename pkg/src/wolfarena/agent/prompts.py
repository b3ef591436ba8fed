"""Prompt templates with ``[SLOT]`` markers, persuasion example banks, and the
language pack that loads both from package data."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

from ..game import DivineRecord, Role, TalkEntry, agent_name

SLOT_NAMES = (
    "TASK_DESCRIPTION",
    "GAME_RULES",
    "DIALOGUE_HISTORY",
    "DIVINATION_RESULT",
    "CONDITION_ANALYSIS",
    "VOTE_TARGET",
    "PERSUASION_EXAMPLES",
)
SLOT_RE = re.compile(r"\[(" + "|".join(SLOT_NAMES) + r")\]")


class TemplateError(ValueError):
    pass


class PersuasionStrategy(str, Enum):
    LOGICAL = "logical"
    CREDIBILITY = "credibility"
    EMOTIONAL = "emotional"


# fixed talk-turn schedule for the werewolf
PERSUASION_SCHEDULE: dict[int, PersuasionStrategy] = {
    3: PersuasionStrategy.LOGICAL,
    4: PersuasionStrategy.CREDIBILITY,
    5: PersuasionStrategy.EMOTIONAL,
}


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(SLOT_RE.findall(self.body))

    def render(self, bindings: Mapping[str, str]) -> str:
        """Substitute every slot in one pass.

        Every slot in the body must be bound and every binding must name a
        slot of the body, so a template without a slot can never receive it.
        """
        missing = self.slots - set(bindings)
        if missing:
            raise TemplateError(f"{self.id}: unbound slots {sorted(missing)}")
        extra = set(bindings) - self.slots
        if extra:
            raise TemplateError(f"{self.id}: template has no slots {sorted(extra)}")
        return SLOT_RE.sub(lambda m: bindings[m.group(1)], self.body)


@dataclass(frozen=True)
class ExampleBank:
    strategy: PersuasionStrategy
    examples: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.examples) != 3:
            raise TemplateError(f"{self.strategy.value} bank needs 3 examples, has {len(self.examples)}")
        for ex in self.examples:
            if "[VOTE_TARGET]" not in ex:
                raise TemplateError(f"{self.strategy.value} example lacks [VOTE_TARGET]: {ex[:40]!r}")

    def substituted(self, target: int) -> list[str]:
        name = agent_name(target)
        return [ex.replace("[VOTE_TARGET]", name) for ex in self.examples]

    def render(self, target: int) -> str:
        return "\n".join(f"Example {i}: {ex}" for i, ex in enumerate(self.substituted(target), 1))


def parse_bank(strategy: PersuasionStrategy, text: str) -> ExampleBank:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    paragraphs = [" ".join(p.split()) for p in "\n".join(lines).split("\n\n")]
    return ExampleBank(strategy, tuple(p for p in paragraphs if p))


@dataclass(frozen=True)
class LanguagePack:
    name: str
    texts: Mapping[str, str]

    def text(self, key: str) -> str:
        try:
            return self.texts[key].strip()
        except KeyError:
            raise TemplateError(f"language pack {self.name!r} has no {key!r}") from None

    def template(self, key: str) -> PromptTemplate:
        return PromptTemplate(key, self.text(key))

    def bank(self, strategy: PersuasionStrategy) -> ExampleBank:
        return parse_bank(strategy, self.texts[f"bank_{strategy.value}"])

    def task(self, role: Role) -> str:
        return self.text(f"task_{role.value.lower()}")


@lru_cache(maxsize=None)
def load_language_pack(name: str = "en") -> LanguagePack:
    root = resources.files("wolfarena").joinpath("data", "lang", name)
    if not root.is_dir():
        raise TemplateError(f"no language pack {name!r}")
    texts = {
        entry.name[: -len(".txt")]: entry.read_text(encoding="utf-8")
        for entry in root.iterdir()
        if entry.name.endswith(".txt")
    }
    pack = LanguagePack(name, texts)
    for strategy in PersuasionStrategy:
        pack.bank(strategy)  # validate eagerly
    return pack


def format_history(entries: Iterable[TalkEntry]) -> str:
    lines = []
    for e in entries:
        if e.text == "Skip":
            continue
        if e.day == 0:
            lines.append(f"Day 0 {agent_name(e.speaker)}: {e.text}")
        else:
            lines.append(f"Day {e.day} Turn {e.turn} {agent_name(e.speaker)}: {e.text}")
    return "\n".join(lines) if lines else "(no dialogue yet)"


def format_divinations(records: Iterable[DivineRecord]) -> str:
    return "\n".join(r.sentence() for r in records) or "(no divination results yet)"
