"""Command line entry point: play, tournament, rates, replay, serve, agent."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .backend import make_backend
from .gamelog import GameLog, LogParseError
from .harness import TournamentConfig, load_logs, play_one, run_tournament
from .rates import compute_win_rates, format_table
from .replay import render_replay


def _add_backend_args(p: argparse.ArgumentParser, multi: bool = False) -> None:
    if multi:
        p.add_argument(
            "--backend",
            action="append",
            help="scripted:FILE, scripted:default, api or random; once for all seats or five times",
        )
    else:
        p.add_argument("--backend", default="scripted:default", help="scripted:FILE, scripted:default or api")
    p.add_argument("--api-url", help="chat-completions endpoint for the api backend")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY")
    p.add_argument("--model", default="gpt-4o-2024-05-13")


def _parse_teams(spec: Optional[str]) -> Optional[dict[int, str]]:
    if not spec:
        return None
    teams = {}
    for part in spec.split(","):
        seat, label = part.split("=", 1)
        teams[int(seat)] = label
    return teams


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wolfarena", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("play", help="play one self-play game and print its transcript")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--talk-turns", type=int, default=5)
    p.add_argument("--log", type=Path, help="also write the game log here")
    _add_backend_args(p)

    p = sub.add_parser("tournament", help="play many self-play games and print win rates")
    p.add_argument("--games", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--talk-turns", type=int, default=5)
    p.add_argument("--log-dir", type=Path, default=Path("logs"))
    p.add_argument("--no-rotate", action="store_true", help="draw roles at random instead of rotating")
    p.add_argument("--timeout-ms", type=int, default=60_000)
    _add_backend_args(p, multi=True)

    p = sub.add_parser("rates", help="aggregate win rates from a directory of logs")
    p.add_argument("--logs", type=Path, required=True)
    p.add_argument("--teams", help="seat-to-team map, e.g. 1=a,2=a,3=b,4=b,5=b")

    p = sub.add_parser("replay", help="print the transcript of a game log")
    p.add_argument("--log", type=Path, required=True)

    p = sub.add_parser("serve", help="host games for five networked agents")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--talk-turns", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout-ms", type=int, default=60_000)
    p.add_argument("--log-dir", type=Path, default=Path("logs"))
    p.add_argument("--games", type=int, default=1)

    p = sub.add_parser("agent", help="connect one agent to a server")
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--seed", type=int, default=0)
    _add_backend_args(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.command == "play":
        cfg = TournamentConfig(
            n_games=1,
            seed=args.seed,
            rotate=False,
            seat_backends=(args.backend,),
            talk_turns=args.talk_turns,
            api_url=args.api_url,
            api_key_env=args.api_key_env,
            model=args.model,
        )
        game_log = play_one(cfg, 0)
        if args.log:
            game_log.write(args.log)
        print(render_replay(game_log), end="")
        return 1 if game_log.aborted else 0

    if args.command == "tournament":
        cfg = TournamentConfig(
            n_games=args.games,
            seed=args.seed,
            rotate=not args.no_rotate,
            seat_backends=tuple(args.backend or ["scripted:default"]),
            talk_turns=args.talk_turns,
            log_dir=args.log_dir,
            deadline_ms=args.timeout_ms,
            api_url=args.api_url,
            api_key_env=args.api_key_env,
            model=args.model,
        )
        result = run_tournament(cfg)
        print(format_table(compute_win_rates(result.completed)))
        if result.aborted:
            print(f"{len(result.aborted)} game(s) aborted", file=sys.stderr)
            return 1
        return 0

    if args.command == "rates":
        try:
            logs = load_logs(args.logs)
        except LogParseError as exc:
            print(f"bad log: {exc}", file=sys.stderr)
            return 2
        print(format_table(compute_win_rates(logs, _parse_teams(args.teams))))
        aborted = sum(1 for lg in logs if lg.aborted)
        if aborted:
            print(f"{aborted} aborted game(s) excluded", file=sys.stderr)
            return 1
        return 0

    if args.command == "replay":
        try:
            print(render_replay(GameLog.read(args.log)), end="")
        except LogParseError as exc:
            print(f"bad log: {exc}", file=sys.stderr)
            return 2
        return 0

    if args.command == "serve":
        from .server import serve

        logs = serve(
            args.host,
            args.port,
            talk_turns=args.talk_turns,
            seed=args.seed,
            timeout_ms=args.timeout_ms,
            log_dir=args.log_dir,
            games=args.games,
        )
        for game_log in logs:
            print(render_replay(game_log), end="")
        return 0

    if args.command == "agent":
        from .agent import LLMAgent
        from .server import run_agent_connection

        host, _, port = args.connect.rpartition(":")
        backend = make_backend(args.backend, args.api_url, args.api_key_env, args.model)
        run_agent_connection(host or "127.0.0.1", int(port), LLMAgent(backend, seed=args.seed))
        return 0

    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
