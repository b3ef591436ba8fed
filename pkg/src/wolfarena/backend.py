"""Chat-completion backends.

``ApiBackend`` talks to any service exposing the usual chat-completions
endpoint. ``ScriptedBackend`` answers from an ordered rule file and records
every call, so whole games can run offline and be inspected afterwards.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional, Protocol, Union

import httpx

from .game import find_agents

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 512


class BackendError(Exception):
    """Non-retryable backend failure."""


class RetryableBackendError(BackendError):
    """Transport errors, timeouts, rate limits and 5xx answers."""


class AuthenticationError(BackendError):
    pass


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    # routing hints (role, kind, stage, day, turn, agent); never sent over the API
    tags: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.user_text:
            raise ValueError("user_text must be non-empty")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    latency_ms: int
    backend_id: str


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def complete_with_retry(
    backend: ChatBackend,
    request: ChatRequest,
    retries: int = 2,
    base_delay: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """Call *backend*, retrying retryable failures with exponential backoff."""
    for attempt in range(retries + 1):
        try:
            return backend.complete(request)
        except RetryableBackendError as exc:
            if attempt == retries:
                raise
            delay = base_delay * 2**attempt
            log.warning("backend call failed (%s); retry %d in %.1fs", exc, attempt + 1, delay)
            sleep(delay)
    raise AssertionError("unreachable")


class ApiBackend:
    def __init__(
        self,
        url: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        client: Optional[httpx.Client] = None,
    ):
        self.url = url
        self.model = model
        self.api_key = api_key
        self._client = client or httpx.Client(timeout=timeout)
        self.backend_id = f"api:{model}"

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        start = time.monotonic()
        try:
            resp = self._client.post(self.url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise RetryableBackendError(f"transport error: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RetryableBackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code != 200:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected response body: {resp.text[:200]}") from exc
        latency = int((time.monotonic() - start) * 1000)
        return ChatResponse(text=text or "", latency_ms=latency, backend_id=self.backend_id)


# ---------------------------------------------------------------------------
# scripted backend

_MATCH_KEYS = ("role", "kind", "stage", "day", "turn", "agent", "contains")
_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def _matches_number(pattern: Any, value: Any) -> bool:
    if pattern is None or pattern == "*":
        return True
    if value is None:
        return False
    if isinstance(pattern, list):
        return value in pattern
    if isinstance(pattern, str) and "-" in pattern:
        lo, hi = pattern.split("-", 1)
        return int(lo) <= value <= int(hi)
    return int(pattern) == value


@dataclass(frozen=True)
class Capture:
    name: str
    pattern: re.Pattern
    pick: Optional[str] = None  # "first" | "last" | "hash" over Agent[0k] mentions

    def extract(self, text: str, salt: str) -> str:
        m = self.pattern.search(text)
        if m is None:
            return ""
        found = m.group(1) if m.groups() else m.group(0)
        if self.pick is None:
            return found
        agents = find_agents(found)
        if not agents:
            return ""
        if self.pick == "first":
            chosen = agents[0]
        elif self.pick == "last":
            chosen = agents[-1]
        else:
            chosen = agents[zlib.crc32((salt + text).encode("utf-8")) % len(agents)]
        return f"Agent[{chosen:02d}]"


@dataclass(frozen=True)
class ScriptRule:
    match: dict[str, Any]
    reply: str
    captures: tuple[Capture, ...] = ()

    @property
    def is_catch_all(self) -> bool:
        return not any(self.match.get(k) not in (None, "*") for k in _MATCH_KEYS)

    def applies(self, request: ChatRequest) -> bool:
        tags = request.tags
        for key in ("role", "kind", "stage"):
            want = self.match.get(key)
            if want not in (None, "*") and str(tags.get(key, "")).upper() != str(want).upper():
                return False
        for key in ("day", "turn", "agent"):
            if not _matches_number(self.match.get(key), tags.get(key)):
                return False
        needle = self.match.get("contains")
        if needle and needle not in request.user_text:
            return False
        return True

    def render(self, request: ChatRequest, index: int) -> str:
        values = {k: str(v) for k, v in request.tags.items()}
        agent = request.tags.get("agent")
        if agent is not None:
            values["self"] = f"Agent[{int(agent):02d}]"
        for cap in self.captures:
            values[cap.name] = cap.extract(request.user_text, f"{index}:{cap.name}:")
        return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), self.reply)

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptRule":
        match = dict(data.get("match", {}))
        unknown = set(match) - set(_MATCH_KEYS)
        if unknown:
            raise ScriptError(f"unknown match keys {sorted(unknown)}")
        if "reply" not in data:
            raise ScriptError("rule without a reply")
        caps = []
        for name, spec in data.get("captures", {}).items():
            if isinstance(spec, str):
                spec = {"pattern": spec}
            pick = spec.get("pick")
            if pick not in (None, "first", "last", "hash"):
                raise ScriptError(f"bad pick mode {pick!r}")
            caps.append(Capture(name, re.compile(spec["pattern"]), pick))
        return cls(match=match, reply=str(data["reply"]), captures=tuple(caps))


class ScriptedBackend:
    """Deterministic rule-driven stand-in for a chat model.

    The first rule whose ``match`` accepts the request's tags wins. Every
    script must end in a catch-all rule. Calls are serialized through one
    recorder and can be read back with :meth:`recorded_calls`.
    """

    def __init__(self, rules: list[ScriptRule], name: str = "scripted"):
        if not rules or not any(r.is_catch_all for r in rules):
            raise ScriptError("a script needs a catch-all rule")
        self.rules = list(rules)
        self.backend_id = name
        self._calls: list[tuple[ChatRequest, ChatResponse]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_data(cls, data: Union[dict, list], name: str = "scripted") -> "ScriptedBackend":
        raw = data["rules"] if isinstance(data, dict) else data
        return cls([ScriptRule.from_dict(r) for r in raw], name=name)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScriptedBackend":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScriptError(f"{path}: {exc}") from exc
        return cls.from_data(data, name=f"scripted:{Path(path).name}")

    @classmethod
    def default(cls) -> "ScriptedBackend":
        text = resources.files("wolfarena").joinpath("data/scripts/default.json").read_text("utf-8")
        return cls.from_data(json.loads(text), name="scripted:default")

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            for i, rule in enumerate(self.rules):
                if rule.applies(request):
                    text = rule.render(request, i)
                    break
            else:  # pragma: no cover - guarded by the catch-all check
                raise ScriptError("no rule matched")
            response = ChatResponse(text=text, latency_ms=0, backend_id=self.backend_id)
            self._calls.append((request, response))
            return response

    def recorded_calls(self) -> list[tuple[ChatRequest, ChatResponse]]:
        with self._lock:
            return list(self._calls)


def resolve_script_path(spec: str) -> Optional[Path]:
    """``scripted:default`` means the bundled script; anything else is a path."""
    if spec == "default":
        return None
    return Path(spec)


def make_backend(
    spec: str,
    api_url: Optional[str] = None,
    api_key_env: str = "OPENAI_API_KEY",
    model: str = "gpt-4o-2024-05-13",
) -> ChatBackend:
    """Build a backend from a CLI spec: ``scripted:FILE``, ``scripted:default`` or ``api``."""
    if spec.startswith("scripted:"):
        path = resolve_script_path(spec.split(":", 1)[1])
        return ScriptedBackend.default() if path is None else ScriptedBackend.from_file(path)
    if spec == "api":
        if not api_url:
            raise BackendError("the api backend needs --api-url")
        return ApiBackend(api_url, model, api_key=os.environ.get(api_key_env))
    raise BackendError(f"unknown backend spec {spec!r}")
