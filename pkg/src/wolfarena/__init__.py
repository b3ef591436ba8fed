"""Five-player werewolf arena: rules engine, wire protocol, game server,
situation-analysis LLM agents and self-play evaluation."""

from .game import GameConfig, Role, Species, Team
from .gamelog import GameLog

__all__ = ["GameConfig", "GameLog", "Role", "Species", "Team"]
__version__ = "0.1.0"
