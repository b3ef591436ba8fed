import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wolfarena.game import (
    AGENT_IDS,
    ROLE_MULTISET,
    AttackDone,
    AttackRecord,
    DivineDone,
    DivineRecord,
    GameConfig,
    GameError,
    GameState,
    Phase,
    PhaseKind,
    ProtocolViolation,
    Role,
    Species,
    TalkDone,
    TalkEntry,
    Team,
    VoteDone,
    VoteRecord,
    WinReason,
    agent_name,
    assign_roles,
    check_winner,
    divine,
    speaking_order,
    step_phase,
    tally_votes,
    top_candidates,
)

from .conftest import assignment_of

STANDARD = assignment_of(Role.VILLAGER, Role.SEER, Role.POSSESSED, Role.VILLAGER, Role.WEREWOLF)


def _talk(state, day, turn):
    entries = tuple(TalkEntry(day, turn, a, "Skip") for a in sorted(state.alive))
    return step_phase(state, TalkDone(day, turn, entries))


def _votes(day, pairs):
    return tuple(VoteRecord(day, v, t) for v, t in pairs)


def _to_night_vote(state, day):
    while state.phase.kind is PhaseKind.DAY_TALK:
        state = _talk(state, day, state.phase.turn)
    assert state.phase == Phase(PhaseKind.NIGHT_VOTE, day)
    return state


def _after_night0(assignment=STANDARD):
    state = GameState.new(GameConfig(), assignment)
    state = _talk(state, 0, 0)
    seer = state.agent_with(Role.SEER)
    target = 1 if seer != 1 else 2
    rec = DivineRecord(0, seer, target, divine(state.assignment, target))
    return step_phase(state, DivineDone(0, rec))


class TestAssignRoles:
    def test_multiset_any_seed(self):
        for seed in range(200):
            roles = assign_roles(GameConfig(rng_seed=seed), random.Random(seed))
            assert sorted(roles) == list(AGENT_IDS)
            assert Counter(roles.values()) == {Role.VILLAGER: 2, Role.SEER: 1, Role.POSSESSED: 1, Role.WEREWOLF: 1}

    def test_same_seed_same_assignment(self):
        a = assign_roles(GameConfig(rng_seed=7), random.Random(7))
        b = assign_roles(GameConfig(rng_seed=7), random.Random(7))
        assert a == b

    def test_werewolf_frequency_is_uniform(self):
        # brute-force count over 10,000 seeds
        counts = Counter()
        for seed in range(10_000):
            roles = assign_roles(GameConfig(rng_seed=seed), random.Random(seed))
            counts[next(a for a, r in roles.items() if r is Role.WEREWOLF)] += 1
        for agent in AGENT_IDS:
            assert 1800 <= counts[agent] <= 2200, counts


class TestSpeakingOrder:
    def test_singleton(self):
        assert speaking_order({3}, random.Random(0)) == [3]

    @given(st.sets(st.sampled_from(AGENT_IDS), min_size=1), st.integers())
    def test_permutation(self, alive, seed):
        assert sorted(speaking_order(alive, random.Random(seed))) == sorted(alive)

    def test_replay_same_draws(self):
        def draws(seed):
            rng = random.Random(seed)
            return [speaking_order(set(AGENT_IDS), rng) for _ in range(10)]

        first, second = draws(11), draws(11)
        assert first == second
        assert len({tuple(o) for o in first}) > 1  # fresh draw every turn

    def test_empty_is_an_error(self):
        with pytest.raises(GameError):
            speaking_order(set(), random.Random(0))


class TestDivine:
    @pytest.mark.parametrize(
        "target, expected",
        [(5, Species.WEREWOLF), (3, Species.HUMAN), (1, Species.HUMAN), (2, Species.HUMAN)],
    )
    def test_species(self, target, expected):
        assert divine(STANDARD, target) is expected

    def test_possessed_reads_human(self):
        assert STANDARD[3] is Role.POSSESSED
        assert divine(STANDARD, 3) is Species.HUMAN

    def test_unknown_target(self):
        with pytest.raises(GameError):
            divine(STANDARD, 9)


class TestTally:
    def test_unique_maximum(self):
        votes = _votes(1, [(2, 1), (3, 1), (4, 1), (1, 3)])
        assert tally_votes(votes, random.Random(0)) == 1

    def test_tie_is_seeded(self):
        votes = _votes(1, [(1, 2), (2, 1)])
        picks = {tally_votes(votes, random.Random(s)) for s in range(50)}
        assert picks == {1, 2}
        assert tally_votes(votes, random.Random(5)) == tally_votes(votes, random.Random(5))

    def test_single_voter(self):
        assert tally_votes(_votes(1, [(1, 2)]), random.Random(0)) == 2

    def test_empty(self):
        with pytest.raises(GameError):
            tally_votes([], random.Random(0))

    def test_no_tie_consumes_no_randomness(self):
        rng = random.Random(3)
        before = rng.getstate()
        tally_votes(_votes(1, [(1, 2), (3, 2), (2, 1)]), rng)
        assert rng.getstate() == before

    @settings(max_examples=300)
    @given(st.lists(st.tuples(st.sampled_from(AGENT_IDS), st.sampled_from(AGENT_IDS)), min_size=1), st.integers())
    def test_against_brute_force(self, pairs, seed):
        votes = [VoteRecord(1, v, t) for v, t in pairs]
        counts = {}
        for v in votes:
            counts[v.target] = counts.get(v.target, 0) + 1
        best = max(counts.values())
        tie_set = {a for a, c in counts.items() if c == best}
        assert tally_votes(votes, random.Random(seed)) in tie_set
        assert set(top_candidates(votes)) == tie_set


class TestCheckWinner:
    def test_werewolf_exiled(self):
        state = GameState.new(GameConfig(), STANDARD)
        state.exile_history.append((1, 5))
        state.alive.discard(5)
        assert len(state.alive) == 4
        assert check_winner(state).winner is Team.HUMAN
        assert check_winner(state).reason is WinReason.WEREWOLF_EXILED

    def test_parity(self):
        state = GameState.new(GameConfig(), STANDARD)
        state.alive = {5, 1}
        out = check_winner(state)
        assert (out.winner, out.reason) == (Team.WEREWOLF, WinReason.PARITY_REACHED)

    def test_continue(self):
        state = GameState.new(GameConfig(), STANDARD)
        state.alive = {2, 1, 5}
        assert check_winner(state) is None

    def test_possessed_counts_as_human(self):
        state = GameState.new(GameConfig(), STANDARD)
        state.alive = {3, 5}
        assert check_winner(state).winner is Team.WEREWOLF
        state.alive = {3, 5, 1}
        assert check_winner(state) is None


class TestStepPhase:
    def test_night0_to_day1(self):
        state = _after_night0()
        assert state.phase == Phase(PhaseKind.DAY_TALK, 1, 1)

    def test_werewolf_exile_finishes(self):
        state = _to_night_vote(_after_night0(), 1)
        votes = _votes(1, [(1, 5), (2, 5), (3, 1), (4, 5), (5, 1)])
        state = step_phase(state, VoteDone(1, votes, 5))
        assert state.phase.kind is PhaseKind.FINISHED
        assert state.outcome.reason is WinReason.WEREWOLF_EXILED

    def test_villager_exile_goes_to_attack(self):
        state = _to_night_vote(_after_night0(), 1)
        votes = _votes(1, [(1, 4), (2, 4), (3, 4), (4, 1), (5, 4)])
        state = step_phase(state, VoteDone(1, votes, 4))
        assert state.phase == Phase(PhaseKind.NIGHT_ATTACK, 1)
        assert state.outcome is None

    def test_full_path_to_parity(self):
        state = _to_night_vote(_after_night0(), 1)
        state = step_phase(state, VoteDone(1, _votes(1, [(1, 4), (2, 4), (3, 4), (4, 1), (5, 4)]), 4))
        state = step_phase(state, AttackDone(1, AttackRecord(1, 5, 1)))
        assert state.phase == Phase(PhaseKind.NIGHT_DIVINE, 1)
        state = step_phase(state, DivineDone(1, DivineRecord(1, 2, 3, Species.HUMAN)))
        state = _to_night_vote(state, 2)
        state = step_phase(state, VoteDone(2, _votes(2, [(2, 3), (3, 2), (5, 2)]), 2))
        assert state.finished
        assert state.outcome.winner is Team.WEREWOLF
        assert state.alive == {3, 5}

    def test_dead_seer_skips_divine(self):
        state = _to_night_vote(_after_night0(), 1)
        state = step_phase(state, VoteDone(1, _votes(1, [(1, 4), (2, 4), (3, 4), (4, 1), (5, 4)]), 4))
        state = step_phase(state, AttackDone(1, AttackRecord(1, 5, 2)))
        assert state.phase == Phase(PhaseKind.DAY_TALK, 2, 1)

    def test_mismatched_event(self):
        state = GameState.new(GameConfig(), STANDARD)
        with pytest.raises(ProtocolViolation):
            step_phase(state, VoteDone(1, _votes(1, [(1, 2)]), 2))

    def test_wrong_divination_result_rejected(self):
        state = _talk(GameState.new(GameConfig(), STANDARD), 0, 0)
        with pytest.raises(ProtocolViolation):
            step_phase(state, DivineDone(0, DivineRecord(0, 2, 5, Species.HUMAN)))

    def test_exile_must_be_a_top_candidate(self):
        state = _to_night_vote(_after_night0(), 1)
        votes = _votes(1, [(1, 4), (2, 4), (3, 4), (4, 1), (5, 4)])
        with pytest.raises(ProtocolViolation):
            step_phase(state, VoteDone(1, votes, 1))

    def test_missing_speaker_rejected(self):
        state = GameState.new(GameConfig(), STANDARD)
        with pytest.raises(ProtocolViolation):
            step_phase(state, TalkDone(0, 0, (TalkEntry(0, 0, 1, "hi"),)))

    def test_finished_game_rejects_events(self):
        state = _to_night_vote(_after_night0(), 1)
        state = step_phase(state, VoteDone(1, _votes(1, [(1, 5), (2, 5), (3, 5), (4, 5), (5, 1)]), 5))
        with pytest.raises(ProtocolViolation):
            step_phase(state, AttackDone(1, None))


def test_config_rejects_short_days():
    with pytest.raises(GameError):
        GameConfig(talk_turns_per_day=4)


def test_agent_name():
    assert agent_name(3) == "Agent[03]"
    with pytest.raises(GameError):
        agent_name(6)


def test_role_multiset_constant():
    assert Counter(ROLE_MULTISET) == {Role.VILLAGER: 2, Role.SEER: 1, Role.POSSESSED: 1, Role.WEREWOLF: 1}
    assert Role.POSSESSED.team is Team.WEREWOLF and Role.POSSESSED.species is Species.HUMAN
    assert Role.SEER.team is Team.HUMAN
