import pytest

from wolfarena.agent import LLMAgent
from wolfarena.backend import ScriptedBackend
from wolfarena.game import GameConfig, Role
from wolfarena.server import local_slots, run_game


def play_scripted(seed, assignment=None, backend=None, talk_turns=5, wire=True):
    """One full game of five LLM agents sharing a scripted backend."""
    backend = backend or ScriptedBackend.default()
    agents = [LLMAgent(backend, seed=seed, retry_delay=0) for _ in range(5)]
    game_log = run_game(
        GameConfig(talk_turns_per_day=talk_turns, rng_seed=seed),
        local_slots(agents, wire=wire),
        assignment,
    )
    return game_log, backend, agents


def assignment_of(*roles):
    return dict(zip(range(1, 6), roles))


@pytest.fixture
def standard_assignment():
    # Agent[05] is the werewolf
    return assignment_of(Role.VILLAGER, Role.SEER, Role.POSSESSED, Role.VILLAGER, Role.WEREWOLF)


# acceptance criteria report: one line per criterion at the end of the run
CRITERIA_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA_RESULTS):
        status, title, detail = CRITERIA_RESULTS[n]
        terminalreporter.write_line(f"CRITERION {n} {status}: {title}{' - ' + detail if detail else ''}")
