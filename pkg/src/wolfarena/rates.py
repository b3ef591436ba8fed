"""Win-rate aggregation per team label and role."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Optional

from .game import Role
from .gamelog import GameLog

ROLE_COLUMNS: tuple[Role, ...] = (Role.POSSESSED, Role.SEER, Role.VILLAGER, Role.WEREWOLF)


def win_percent(wins: int, games: int) -> Optional[Decimal]:
    """``wins / games`` as a percentage rounded half-up to two decimals."""
    if games == 0:
        return None
    return (Decimal(wins) * 100 / Decimal(games)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def format_percent(wins: int, games: int) -> str:
    pct = win_percent(wins, games)
    return "-" if pct is None else f"{pct}%"


@dataclass
class RateCell:
    wins: int = 0
    games: int = 0

    @property
    def rate(self) -> Optional[Decimal]:
        return win_percent(self.wins, self.games)

    def __str__(self) -> str:
        return f"{format_percent(self.wins, self.games)} ({self.games})"


@dataclass
class WinRateRow:
    team_label: str
    per_role: dict[Role, RateCell] = field(default_factory=lambda: {r: RateCell() for r in ROLE_COLUMNS})
    total: RateCell = field(default_factory=RateCell)

    def add(self, role: Role, won: bool) -> None:
        for cell in (self.per_role[role], self.total):
            cell.games += 1
            cell.wins += int(won)


def compute_win_rates(logs: Iterable[GameLog], seat_teams: Optional[Mapping[int, str]] = None) -> list[WinRateRow]:
    """A seat wins a game when the team of the role it held won.

    *seat_teams* maps seat (agent id) to a team label; when omitted each log's
    own seat labels are used, falling back to one row per seat. Aborted logs
    are skipped.
    """
    rows: dict[str, WinRateRow] = {}
    for game_log in logs:
        outcome = game_log.outcome
        if game_log.aborted or outcome is None:
            continue
        for seat, role in sorted(game_log.assignment.items()):
            if seat_teams is not None:
                label = seat_teams[seat]
            else:
                label = game_log.seat_labels.get(seat, f"seat{seat}")
            row = rows.setdefault(label, WinRateRow(label))
            row.add(role, role.team is outcome.winner)
    return list(rows.values())


def format_table(rows: Iterable[WinRateRow]) -> str:
    header = ["Team", *(r.value.capitalize() for r in ROLE_COLUMNS), "Wins", "Games", "Rates"]
    body = []
    for row in rows:
        body.append(
            [
                row.team_label,
                *(str(row.per_role[r]) for r in ROLE_COLUMNS),
                str(row.total.wins),
                str(row.total.games),
                format_percent(row.total.wins, row.total.games),
            ]
        )
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    fmt = lambda line: " | ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep, *(fmt(line) for line in body)])
