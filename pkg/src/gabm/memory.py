"""Agent memory: formative (long-term) episodes plus an associative store queried by similarity.

Both tiers live in one append-only ``MemoryStore``; ``MemoryEntry.kind`` tells
them apart.
"""

from __future__ import annotations

import datetime as dt
import heapq
import math
import re
from dataclasses import dataclass

from . import prompts
from .hashing import fnv1a64
from .llm import Backend, CompletionRequest
from .scenario import AgentProfile, SharedContext, SimClock, format_timestamp, parse_timestamp

KINDS = ("formative", "context", "observation", "self_summary", "goal")
DEFAULT_TAU = 86400.0

_TOKEN = re.compile(r"[^\W_]+")
_DUMP_LINE = re.compile(r"^\[(\d\d [A-Z][a-z]{2} \d{4} \d\d:\d\d:\d\d)\] (.*)$")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def embed(text: str, dim: int) -> tuple[float, ...]:
    """Signed feature hashing of lowercase alphanumeric tokens, L2-normalised.

    Each token's 64-bit FNV-1a hash ``h`` adds +1 (``h`` odd) or -1 (``h`` even)
    at index ``(h >> 1) % dim``. No tokens, or a perfect cancellation, gives the
    zero vector.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    counts = [0] * dim
    for tok in tokenize(text):
        h = fnv1a64(tok)
        counts[(h >> 1) % dim] += 1 if h & 1 else -1
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0:
        return tuple(0.0 for _ in counts)
    return tuple(c / norm for c in counts)


def norm(v) -> float:
    return math.sqrt(sum(x * x for x in v))


def cosine(a, b) -> float:
    na, nb = norm(a), norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


@dataclass(frozen=True)
class MemoryEntry:
    id: int
    timestamp: dt.datetime
    text: str
    kind: str
    embedding: tuple[float, ...]

    def render(self) -> str:
        return f"[{format_timestamp(self.timestamp)}] {self.text}"


class MemoryStore:
    """Append-only list of memories with top-k similarity retrieval."""

    def __init__(self, dim: int = 64, alpha: float = 1.0, tau: float = DEFAULT_TAU):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.dim = dim
        self.alpha = alpha
        self.tau = tau
        self._entries: list[MemoryEntry] = []

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i) -> MemoryEntry:
        return self._entries[i]

    @property
    def entries(self) -> tuple[MemoryEntry, ...]:
        return tuple(self._entries)

    def add(self, timestamp: dt.datetime, text: str, kind: str = "observation") -> int:
        if not text:
            raise ValueError("memory text must be non-empty")
        if kind not in KINDS:
            raise ValueError(f"unknown memory kind {kind!r}")
        entry = MemoryEntry(len(self._entries), timestamp, text, kind, embed(text, self.dim))
        self._entries.append(entry)
        return entry.id

    def score(self, query_vec, entry: MemoryEntry, now: dt.datetime | None) -> float:
        sim = cosine(query_vec, entry.embedding)
        if self.alpha == 1.0:
            return sim
        age = max(0.0, (now - entry.timestamp).total_seconds())
        return self.alpha * sim + (1.0 - self.alpha) * math.exp(-age / self.tau)

    def retrieve(self, query: str, k: int, now: dt.datetime | None = None) -> list[MemoryEntry]:
        """Top ``k`` entries by score; ties go to the newer timestamp, then the higher id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._entries:
            return []
        if now is None:
            now = max(e.timestamp for e in self._entries)
        q = embed(query, self.dim)
        return heapq.nlargest(k, self._entries, key=lambda e: (self.score(q, e, now), e.timestamp, e.id))

    def dump(self) -> str:
        return render_dump(self._entries)

    def copy(self) -> "MemoryStore":
        clone = MemoryStore(self.dim, self.alpha, self.tau)
        clone._entries = list(self._entries)
        return clone


def render_dump(entries) -> str:
    """One ``[DD Mon YYYY HH:MM:SS] text`` line per entry."""
    return "".join(e.render() + "\n" for e in entries)


def parse_dump(text: str) -> list[tuple[dt.datetime, str]]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _DUMP_LINE.match(line)
        if not m:
            raise ValueError(f"line {n}: not a '[timestamp] text' line")
        out.append((parse_timestamp(m.group(1)), m.group(2)))
    return out


def formative_timestamp(clock: SimClock, profile: AgentProfile, age: int) -> dt.datetime:
    birth_year = clock.birth_year if clock.birth_year is not None else clock.start.year - profile.current_age
    month, day = clock.birthday
    return dt.datetime(birth_year + age, month, day)


def context_items(profile: AgentProfile, shared: SharedContext) -> list[tuple[str, str]]:
    """The same-timestamp context block, in canonical order, as (kind, text)."""
    items = []
    existence = shared.existence_statement()
    if existence:
        items.append(("context", existence))
    items.extend(("context", s) for s in shared.statements)
    items.append(("context", f"{shared.summary} {profile.context}".strip()))
    items.append(("goal", profile.goal))
    return items


def build_formative_memories(
    profile: AgentProfile,
    shared: SharedContext,
    backend: Backend,
    clock: SimClock,
    store: MemoryStore | None = None,
    context_order: list[int] | None = None,
) -> list[MemoryEntry]:
    """Create an agent's initial memories and append them to ``store``.

    Order: one backend-written episode per formative age, a backend-written
    self summary at ``clock.start``, then the context block (see
    ``context_items``) at ``clock.start``. ``context_order`` optionally permutes
    the context block, e.g. to reproduce a listing recorded elsewhere.
    """
    if not shared.summary:
        raise ValueError("shared context must be summarised before building memories")
    if store is None:
        store = MemoryStore()
    first = len(store)

    episodes = []
    for age in profile.formative_ages:
        text = backend.complete(CompletionRequest(
            user_text=prompts.render_formative(profile, age, shared.summary),
            system_text="You write short, vivid character backstories.",
            tag="memory.formative",
        ))
        eid = store.add(formative_timestamp(clock, profile, age), text, "formative")
        episodes.append(store[eid])

    now_text = format_timestamp(clock.start)
    summary = backend.complete(CompletionRequest(
        user_text=prompts.render_self_summary(profile, now_text, episodes),
        system_text="You write short, vivid character backstories.",
        tag="memory.self_summary",
    ))
    store.add(clock.start, summary, "self_summary")

    items = context_items(profile, shared)
    if context_order is not None:
        if sorted(context_order) != list(range(len(items))):
            raise ValueError(f"context_order must be a permutation of range({len(items)})")
        items = [items[i] for i in context_order]
    for kind, text in items:
        store.add(clock.start, text, kind)
    return list(store.entries[first:])
