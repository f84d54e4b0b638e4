"""Text-completion backends: a chat-completion HTTP client and a scripted replayer.

Both expose ``Backend.complete(request) -> str`` and record every call in
``Backend.transcript`` as ``(tag, prompt hash, response hash)``.
"""

from __future__ import annotations

import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import httpx
import yaml

from .hashing import fnv1a64_hex

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("http", "scripted")
EXHAUSTION_MODES = ("error", "echo")

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 512
BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0


class BackendError(Exception):
    """Base class for anything that stops a backend from producing text."""


class BackendConfigError(BackendError):
    pass


class AuthenticationError(BackendError):
    pass


class MalformedResponseError(BackendError):
    pass


class RetriesExhaustedError(BackendError):
    def __init__(self, attempts: int, last_error: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


class ScriptExhaustedError(BackendError):
    pass


class ScriptParseError(BackendError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


@dataclass
class BackendSettings:
    kind: str = "scripted"
    model_name: str = ""
    api_key_env_var: str = ""
    base_url: str = ""
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    timeout: float = 60.0
    max_retries: int = 3
    script_path: str = ""
    exhaustion_mode: str = "echo"

    def violations(self, prefix: str = "backend") -> list[tuple[str, str]]:
        out = []
        if self.kind not in BACKEND_KINDS:
            out.append((f"{prefix}.kind", f"must be one of {', '.join(BACKEND_KINDS)}"))
        if self.kind == "http":
            if not self.model_name:
                out.append((f"{prefix}.model_name", "required for http backends"))
            if not self.base_url:
                out.append((f"{prefix}.base_url", "required for http backends"))
        if self.kind == "scripted":
            if self.exhaustion_mode not in EXHAUSTION_MODES:
                out.append((f"{prefix}.exhaustion_mode", f"must be one of {', '.join(EXHAUSTION_MODES)}"))
            elif not self.script_path and self.exhaustion_mode != "echo":
                out.append((f"{prefix}.script_path", "required unless exhaustion_mode is echo"))
        if not isinstance(self.temperature, (int, float)) or self.temperature < 0:
            out.append((f"{prefix}.temperature", "must be a real number >= 0"))
        if not isinstance(self.max_tokens, int) or self.max_tokens < 1:
            out.append((f"{prefix}.max_tokens", "must be a positive integer"))
        if not isinstance(self.timeout, (int, float)) or self.timeout <= 0:
            out.append((f"{prefix}.timeout", "must be > 0 seconds"))
        if not isinstance(self.max_retries, int) or self.max_retries < 0:
            out.append((f"{prefix}.max_retries", "must be a non-negative integer"))
        return out


@dataclass
class CompletionRequest:
    user_text: str
    system_text: str = ""
    tag: str = ""
    temperature: float | None = None
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")

    @property
    def prompt_hash(self) -> str:
        return fnv1a64_hex(self.system_text + "\x00" + self.user_text)


@dataclass(frozen=True)
class TranscriptRecord:
    tag: str
    prompt_hash: str
    response_hash: str


def echo_text(user_text: str) -> str:
    """Deterministic stand-in reply derived from the prompt."""
    return "ECHO:" + fnv1a64_hex(user_text)


class Backend:
    """Common bookkeeping; subclasses implement ``_complete``."""

    def __init__(self):
        self.transcript: list[TranscriptRecord] = []
        self._transcript_lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        text = self._complete(request)
        with self._transcript_lock:
            self.transcript.append(
                TranscriptRecord(request.tag, request.prompt_hash, fnv1a64_hex(text))
            )
        return text

    def _complete(self, request: CompletionRequest) -> str:
        raise NotImplementedError


# --- scripted backend -------------------------------------------------------


@dataclass
class ScriptEntry:
    response: str
    match: re.Pattern | None = None
    repeat: bool = False
    line: int | None = None


@dataclass
class ScriptState:
    entries: list[ScriptEntry] = field(default_factory=list)


def _node_line(node) -> int:
    return node.start_mark.line + 1


def parse_script(text: str) -> ScriptState:
    """Parse a script document.

    Grammar (YAML)::

        entries:
          - response: "text"          # unconditional, consumed in order
          - match: "gm\\.resolve"      # regex searched in the tag, then user_text
            response: "text"
            repeat: true               # optional; reusable instead of consumed once
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScriptParseError(str(getattr(exc, "problem", exc)), mark.line + 1 if mark else None) from exc
    if root is None:
        return ScriptState()
    if not isinstance(root, yaml.MappingNode):
        raise ScriptParseError("top level must be a mapping with an 'entries' list", _node_line(root))
    entries_node = None
    for key, value in root.value:
        if key.value == "entries":
            entries_node = value
        else:
            raise ScriptParseError(f"unknown key {key.value!r}", _node_line(key))
    if entries_node is None:
        return ScriptState()
    if not isinstance(entries_node, yaml.SequenceNode):
        raise ScriptParseError("'entries' must be a list", _node_line(entries_node))

    state = ScriptState()
    for node in entries_node.value:
        line = _node_line(node)
        if isinstance(node, yaml.ScalarNode):
            state.entries.append(ScriptEntry(response=node.value, line=line))
            continue
        if not isinstance(node, yaml.MappingNode):
            raise ScriptParseError("entry must be a mapping or a plain string", line)
        data = yaml.safe_load(yaml.serialize(node))
        unknown = set(data) - {"response", "match", "repeat"}
        if unknown:
            raise ScriptParseError(f"unknown entry keys: {sorted(unknown)}", line)
        response = data.get("response")
        if not isinstance(response, str) or not response:
            raise ScriptParseError("entry needs a non-empty 'response' string", line)
        pattern = None
        if "match" in data:
            try:
                pattern = re.compile(str(data["match"]))
            except re.error as exc:
                raise ScriptParseError(f"bad regex: {exc}", line) from exc
        repeat = bool(data.get("repeat", False))
        if repeat and pattern is None:
            raise ScriptParseError("'repeat' only applies to entries with 'match'", line)
        state.entries.append(ScriptEntry(response=response, match=pattern, repeat=repeat, line=line))
    return state


def load_script(path: str | os.PathLike) -> ScriptState:
    return parse_script(Path(path).read_text(encoding="utf-8"))


class ScriptedBackend(Backend):
    """Replays authored responses; matcher entries take precedence over the queue."""

    def __init__(self, script: ScriptState | list[str] | None = None, exhaustion_mode: str = "error"):
        super().__init__()
        if script is None:
            script = ScriptState()
        elif isinstance(script, list):
            script = ScriptState([ScriptEntry(response=r) for r in script])
        if exhaustion_mode not in EXHAUSTION_MODES:
            raise BackendConfigError(f"unknown exhaustion mode {exhaustion_mode!r}")
        self.exhaustion_mode = exhaustion_mode
        self._matchers = [e for e in script.entries if e.match is not None]
        self._queue = [e for e in script.entries if e.match is None]
        self._used: set[int] = set()
        self._next = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return len(self._queue) - self._next

    def _complete(self, request: CompletionRequest) -> str:
        with self._lock:
            for i, entry in enumerate(self._matchers):
                if not entry.repeat and i in self._used:
                    continue
                if entry.match.search(request.tag) or entry.match.search(request.user_text):
                    if not entry.repeat:
                        self._used.add(i)
                    return entry.response
            if self._next < len(self._queue):
                entry = self._queue[self._next]
                self._next += 1
                return entry.response
        if self.exhaustion_mode == "echo":
            return echo_text(request.user_text)
        raise ScriptExhaustedError(f"script exhausted at request tagged {request.tag!r}")


# --- HTTP backend -----------------------------------------------------------


class _Transient(Exception):
    pass


class HttpBackend(Backend):
    """Chat-completion client: POST {base_url}/chat/completions with bearer auth."""

    def __init__(
        self,
        settings: BackendSettings,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter: random.Random | None = None,
    ):
        super().__init__()
        problems = settings.violations()
        if settings.kind != "http" or problems:
            raise BackendConfigError(f"invalid http backend settings: {problems or settings.kind}")
        self.settings = settings
        self.api_key = None
        if settings.api_key_env_var:
            self.api_key = os.environ.get(settings.api_key_env_var)
            if not self.api_key:
                raise BackendConfigError(f"environment variable {settings.api_key_env_var} is not set")
        self._client = client or httpx.Client(timeout=settings.timeout)
        self._sleep = sleep
        self._jitter = jitter or random.Random()

    @property
    def url(self) -> str:
        return self.settings.base_url.rstrip("/") + "/chat/completions"

    def backoff_delay(self, retry: int) -> float:
        return BACKOFF_BASE * BACKOFF_FACTOR**retry * self._jitter.uniform(0.5, 1.5)

    def _payload(self, request: CompletionRequest) -> dict:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        return {
            "model": self.settings.model_name,
            "messages": messages,
            "temperature": self.settings.temperature if request.temperature is None else request.temperature,
            "max_tokens": self.settings.max_tokens if request.max_tokens is None else request.max_tokens,
        }

    def _attempt(self, payload: dict) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._client.post(self.url, json=payload, headers=headers, timeout=self.settings.timeout)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise _Transient(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"HTTP {resp.status_code} from {self.url}")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected response body: {resp.text[:200]}") from exc
        if not isinstance(content, str) or not content.strip():
            raise MalformedResponseError("empty completion content")
        return content

    def _complete(self, request: CompletionRequest) -> str:
        payload = self._payload(request)
        attempts = 0
        while True:
            attempts += 1
            try:
                return self._attempt(payload)
            except _Transient as exc:
                retry = attempts - 1
                if retry >= self.settings.max_retries:
                    raise RetriesExhaustedError(attempts, exc) from exc
                delay = self.backoff_delay(retry)
                logger.warning("%s (tag=%s); retry %d/%d in %.2fs", exc, request.tag, retry + 1,
                               self.settings.max_retries, delay)
                self._sleep(delay)


def make_backend(settings: BackendSettings, base_dir: str | os.PathLike | None = None) -> Backend:
    """Build a fresh backend; relative script paths resolve against ``base_dir``."""
    if settings.kind == "http":
        return HttpBackend(settings)
    if settings.kind == "scripted":
        script = None
        if settings.script_path:
            path = Path(settings.script_path)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            script = load_script(path)
        return ScriptedBackend(script, exhaustion_mode=settings.exhaustion_mode)
    raise BackendConfigError(f"unknown backend kind {settings.kind!r}")
