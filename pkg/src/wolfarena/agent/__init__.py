from .baseline import FixedVoteAgent, RandomAgent
from .core import (
    AgentContext,
    LLMAgent,
    PersuasionPlan,
    SituationAnalysis,
    decide_attack,
    decide_divine,
    fabricate_divination,
)
from .prompts import (
    PERSUASION_SCHEDULE,
    ExampleBank,
    LanguagePack,
    PersuasionStrategy,
    PromptTemplate,
    TemplateError,
    load_language_pack,
)

__all__ = [
    "AgentContext",
    "ExampleBank",
    "FixedVoteAgent",
    "LLMAgent",
    "LanguagePack",
    "PERSUASION_SCHEDULE",
    "PersuasionPlan",
    "PersuasionStrategy",
    "PromptTemplate",
    "RandomAgent",
    "SituationAnalysis",
    "TemplateError",
    "decide_attack",
    "decide_divine",
    "fabricate_divination",
    "load_language_pack",
]
