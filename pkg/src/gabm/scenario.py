"""Scenario documents: who the agents are, when and where the run happens, how it is driven.

A scenario file is YAML with top-level sections ``context``, ``agents``,
``clock``, ``run``, ``backend`` and ``metrics`` (see README for the grammar).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import asdict, dataclass, field, fields

import yaml

from .analytics.metrics import MetricSpec
from .llm import BackendSettings
from .rng import SplitMix64

FORMAT_VERSION = 1
TRAIT_NAMES = ("extraversion", "neuroticism", "openness", "conscientiousness", "agreeableness")
TRAIT_RANGE = (1, 10)
AGE_RANGE = (5, 40)
N_FORMATIVE = 5
MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
RANDOM = "random"


class ScenarioError(Exception):
    pass


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


class ScenarioValidationError(ScenarioError):
    def __init__(self, violations: list[Violation]):
        super().__init__("invalid scenario:\n" + "\n".join(f"  {v}" for v in violations))
        self.violations = violations


# --- timestamps -------------------------------------------------------------


def format_timestamp(t: dt.datetime) -> str:
    """Render as ``DD Mon YYYY HH:MM:SS`` independent of locale."""
    return f"{t.day:02d} {MONTHS[t.month - 1]} {t.year:04d} {t.hour:02d}:{t.minute:02d}:{t.second:02d}"


def parse_timestamp(text: str) -> dt.datetime:
    try:
        day, mon, year, clock = text.split(" ")
        hh, mm, ss = clock.split(":")
        if len(day) != 2 or len(year) != 4 or not (len(hh) == len(mm) == len(ss) == 2):
            raise ValueError
        return dt.datetime(int(year), MONTHS.index(mon) + 1, int(day), int(hh), int(mm), int(ss))
    except ValueError:
        raise ValueError(f"expected 'DD Mon YYYY HH:MM:SS', got {text!r}") from None


# --- domain types -----------------------------------------------------------


@dataclass(frozen=True)
class TraitVector:
    extraversion: int
    neuroticism: int
    openness: int
    conscientiousness: int
    agreeableness: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return tuple(getattr(self, n) for n in TRAIT_NAMES)

    def describe(self) -> str:
        return ", ".join(f"{n} {getattr(self, n)}/10" for n in TRAIT_NAMES)


@dataclass
class AgentProfile:
    name: str
    gender: str
    goal: str
    context: str
    traits: TraitVector
    formative_ages: list[int]

    @property
    def current_age(self) -> int:
        return max(self.formative_ages)


@dataclass
class SharedContext:
    statements: list[str]
    environment: str = ""
    summary: str = ""

    def existence_statement(self) -> str | None:
        if not self.environment:
            return None
        return f"There is a {self.environment}."


@dataclass
class SimClock:
    start: dt.datetime
    round_step: int = 10
    birthday: tuple[int, int] = (7, 3)  # (month, day) of every agent's birthday
    birth_year: int | None = None  # None: start.year - current age

    def render(self, t: dt.datetime | None = None) -> str:
        return format_timestamp(self.start if t is None else t)

    def at_step(self, step: int) -> dt.datetime:
        return self.start + dt.timedelta(seconds=step * self.round_step)

    def birthday_text(self) -> str:
        return f"{self.birthday[1]:02d} {MONTHS[self.birthday[0] - 1]}"


@dataclass
class ScenarioConfig:
    shared_context: SharedContext
    agents: list[AgentProfile]
    clock: SimClock
    rounds: int = 1
    seed: int = 0
    backend: BackendSettings = field(default_factory=BackendSettings)
    metrics: list[MetricSpec] = field(default_factory=list)
    embedding_dim: int = 64
    memory_k: int = 8
    name: str = "scenario"
    format_version: int = FORMAT_VERSION

    @property
    def agent_names(self) -> list[str]:
        return [a.name for a in self.agents]

    def agent(self, name: str) -> AgentProfile:
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)


# --- generation -------------------------------------------------------------


def generate_traits(rng: SplitMix64) -> TraitVector:
    return TraitVector(*(rng.randint(*TRAIT_RANGE) for _ in TRAIT_NAMES))


def generate_formative_ages(rng: SplitMix64) -> list[int]:
    return sorted(rng.randint(*AGE_RANGE) for _ in range(N_FORMATIVE))


# --- validation -------------------------------------------------------------


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate_scenario(config: ScenarioConfig) -> list[Violation]:
    """Every constraint violation in ``config``; an empty list means valid."""
    out: list[tuple[str, str]] = []
    if config.format_version != FORMAT_VERSION:
        out.append(("format_version", f"unsupported version {config.format_version!r}"))

    sc = config.shared_context
    if not isinstance(sc.statements, list) or not any(isinstance(s, str) and s.strip() for s in sc.statements):
        out.append(("context.statements", "needs at least one non-empty statement"))
    else:
        for i, s in enumerate(sc.statements):
            if not isinstance(s, str) or not s.strip():
                out.append((f"context.statements[{i}]", "must be a non-empty string"))

    if not config.agents:
        out.append(("agents", "at least one agent is required"))
    seen: dict[str, int] = {}
    for i, a in enumerate(config.agents):
        p = f"agents[{i}]"
        if not isinstance(a.name, str) or not a.name.strip():
            out.append((f"{p}.name", "must be non-empty"))
        elif a.name in seen:
            out.append((f"{p}.name", f"duplicate agent name {a.name!r} (first at agents[{seen[a.name]}])"))
        else:
            seen[a.name] = i
        if a.name == "*":
            out.append((f"{p}.name", "'*' is reserved"))
        if not isinstance(a.gender, str):
            out.append((f"{p}.gender", "must be a string"))
        for attr in ("goal", "context"):
            v = getattr(a, attr)
            if not isinstance(v, str) or not v.strip():
                out.append((f"{p}.{attr}", "must be non-empty"))
        for t in TRAIT_NAMES:
            v = getattr(a.traits, t)
            if not _is_int(v) or not TRAIT_RANGE[0] <= v <= TRAIT_RANGE[1]:
                out.append((f"{p}.traits.{t}", f"must be an integer in [{TRAIT_RANGE[0]}, {TRAIT_RANGE[1]}], got {v!r}"))
        ages = a.formative_ages
        if not isinstance(ages, list) or len(ages) != N_FORMATIVE:
            out.append((f"{p}.formative_ages", f"must list exactly {N_FORMATIVE} ages"))
        else:
            bad = False
            for j, v in enumerate(ages):
                if not _is_int(v) or not AGE_RANGE[0] <= v <= AGE_RANGE[1]:
                    out.append((f"{p}.formative_ages[{j}]", f"must be an integer in [{AGE_RANGE[0]}, {AGE_RANGE[1]}], got {v!r}"))
                    bad = True
            if not bad and ages != sorted(ages):
                out.append((f"{p}.formative_ages", "must be sorted non-decreasing"))

    c = config.clock
    if not isinstance(c.start, dt.datetime):
        out.append(("clock.start", "must be a 'DD Mon YYYY HH:MM:SS' timestamp"))
    if not _is_int(c.round_step) or c.round_step <= 0:
        out.append(("clock.round_step", "must be a positive number of seconds"))
    month, day = c.birthday
    try:
        if (month, day) == (2, 29):
            raise ValueError
        dt.date(2001, month, day)
    except (ValueError, TypeError):
        out.append(("clock.birthday", "must be a valid 'DD Mon' day (29 Feb not allowed)"))
    if c.birth_year is not None and not _is_int(c.birth_year):
        out.append(("clock.birth_year", "must be an integer year"))
    elif c.birth_year is not None and isinstance(c.start, dt.datetime):
        for i, a in enumerate(config.agents):
            if isinstance(a.formative_ages, list) and a.formative_ages and all(map(_is_int, a.formative_ages)):
                if c.birth_year + max(a.formative_ages) > c.start.year:
                    out.append((f"agents[{i}].formative_ages", "last formative year falls after clock.start"))

    if not _is_int(config.rounds) or config.rounds < 1:
        out.append(("run.rounds", "must be an integer >= 1"))
    if not _is_int(config.seed) or not 0 <= config.seed < 2**64:
        out.append(("run.seed", "must be a 64-bit unsigned integer"))
    if not _is_int(config.embedding_dim) or config.embedding_dim < 1:
        out.append(("run.embedding_dim", "must be a positive integer"))
    if not _is_int(config.memory_k) or config.memory_k < 1:
        out.append(("run.memory_k", "must be a positive integer"))

    out.extend(config.backend.violations("backend"))

    names = [a.name for a in config.agents]
    metric_names: set[str] = set()
    for i, m in enumerate(config.metrics):
        out.extend(m.violations(names, f"metrics[{i}]"))
        if m.name in metric_names:
            out.append((f"metrics[{i}].name", f"duplicate metric name {m.name!r}"))
        metric_names.add(m.name)
    return [Violation(p, msg) for p, msg in out]


# --- parsing ----------------------------------------------------------------


class _Reader:
    """Pulls typed values out of the raw YAML tree, collecting violations."""

    def __init__(self):
        self.violations: list[Violation] = []

    def bad(self, path, message):
        self.violations.append(Violation(path, message))

    def section(self, data, key, path) -> dict:
        v = data.get(key, {})
        if v is None:
            return {}
        if not isinstance(v, dict):
            self.bad(path, "must be a mapping")
            return {}
        return v

    def unknown(self, data: dict, allowed, path):
        for k in data:
            if k not in allowed:
                self.bad(f"{path}.{k}" if path else str(k), "unknown key")


def _agent_from(r: _Reader, raw, path: str, rng: SplitMix64) -> AgentProfile:
    if not isinstance(raw, dict):
        r.bad(path, "must be a mapping")
        raw = {}
    r.unknown(raw, ("name", "gender", "goal", "context", "traits", "formative_ages"), path)
    traits_raw = raw.get("traits", RANDOM)
    if traits_raw == RANDOM:
        traits = generate_traits(rng)
    elif isinstance(traits_raw, dict):
        r.unknown(traits_raw, TRAIT_NAMES, f"{path}.traits")
        missing = [t for t in TRAIT_NAMES if t not in traits_raw]
        for t in missing:
            r.bad(f"{path}.traits.{t}", "missing")
        traits = TraitVector(*(traits_raw.get(t, 0) for t in TRAIT_NAMES))
    else:
        r.bad(f"{path}.traits", f"must be a mapping of the five traits or {RANDOM!r}")
        traits = TraitVector(0, 0, 0, 0, 0)
    ages = raw.get("formative_ages", RANDOM)
    if ages == RANDOM:
        ages = generate_formative_ages(rng)
    elif not isinstance(ages, list):
        r.bad(f"{path}.formative_ages", f"must be a list or {RANDOM!r}")
        ages = []
    return AgentProfile(
        name=str(raw.get("name", "")),
        gender=str(raw.get("gender", "")),
        goal=str(raw.get("goal", "")),
        context=str(raw.get("context", "")),
        traits=traits,
        formative_ages=list(ages),
    )


def _parse_birthday(r: _Reader, text) -> tuple[int, int]:
    try:
        day, mon = str(text).split(" ")
        if len(day) != 2:
            raise ValueError
        return (MONTHS.index(mon) + 1, int(day))
    except ValueError:
        r.bad("clock.birthday", f"expected 'DD Mon', got {text!r}")
        return (7, 3)


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build and validate a config from an already-loaded mapping."""
    r = _Reader()
    if not isinstance(data, dict):
        raise ScenarioValidationError([Violation("", "document must be a mapping")])
    r.unknown(data, ("format_version", "name", "context", "agents", "clock", "run", "backend", "metrics"), "")

    ctx = r.section(data, "context", "context")
    r.unknown(ctx, ("environment", "statements", "summary"), "context")
    statements = ctx.get("statements", [])
    if not isinstance(statements, list):
        r.bad("context.statements", "must be a list")
        statements = []
    shared = SharedContext(
        statements=list(statements),
        environment=str(ctx.get("environment", "") or ""),
        summary=str(ctx.get("summary", "") or ""),
    )

    run = r.section(data, "run", "run")
    r.unknown(run, ("rounds", "seed", "embedding_dim", "memory_k"), "run")
    seed = run.get("seed", 0)
    rng = SplitMix64(seed if _is_int(seed) and 0 <= seed < 2**64 else 0)

    agents_raw = data.get("agents", [])
    if not isinstance(agents_raw, list):
        r.bad("agents", "must be a list")
        agents_raw = []
    agents = [_agent_from(r, a, f"agents[{i}]", rng) for i, a in enumerate(agents_raw)]

    clk = r.section(data, "clock", "clock")
    r.unknown(clk, ("start", "round_step", "birthday", "birth_year"), "clock")
    start = dt.datetime(2000, 1, 1)
    if "start" not in clk:
        r.bad("clock.start", "missing")
    else:
        try:
            start = parse_timestamp(str(clk["start"]))
        except ValueError as exc:
            r.bad("clock.start", str(exc))
    clock = SimClock(
        start=start,
        round_step=clk.get("round_step", 10),
        birthday=_parse_birthday(r, clk.get("birthday", "03 Jul")),
        birth_year=clk.get("birth_year"),
    )

    be = r.section(data, "backend", "backend")
    known = {f.name for f in fields(BackendSettings)}
    r.unknown(be, known, "backend")
    backend = BackendSettings(**{k: v for k, v in be.items() if k in known})

    metrics_raw = data.get("metrics", []) or []
    metrics = []
    if not isinstance(metrics_raw, list):
        r.bad("metrics", "must be a list")
        metrics_raw = []
    mknown = {f.name for f in fields(MetricSpec)}
    for i, m in enumerate(metrics_raw):
        if not isinstance(m, dict):
            r.bad(f"metrics[{i}]", "must be a mapping")
            continue
        r.unknown(m, mknown, f"metrics[{i}]")
        metrics.append(MetricSpec(**{k: "" if v is None else str(v) for k, v in m.items() if k in mknown}))

    config = ScenarioConfig(
        shared_context=shared,
        agents=agents,
        clock=clock,
        rounds=run.get("rounds", 1),
        seed=seed,
        backend=backend,
        metrics=metrics,
        embedding_dim=run.get("embedding_dim", 64),
        memory_k=run.get("memory_k", 8),
        name=str(data.get("name", "scenario")),
        format_version=data.get("format_version", FORMAT_VERSION),
    )
    violations = r.violations + validate_scenario(config)
    if violations:
        raise ScenarioValidationError(violations)
    return config


def load_document(text: str):
    """YAML-load a scenario document without validating it."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ScenarioSyntaxError(problem, mark.line + 1, mark.column + 1) from exc
        raise ScenarioSyntaxError(problem) from exc


def parse_scenario(text: str) -> ScenarioConfig:
    return config_from_dict(load_document(text))


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def config_to_dict(config: ScenarioConfig) -> dict:
    c = config.clock
    clock = {"start": format_timestamp(c.start), "round_step": c.round_step, "birthday": c.birthday_text()}
    if c.birth_year is not None:
        clock["birth_year"] = c.birth_year
    context = {}
    if config.shared_context.environment:
        context["environment"] = config.shared_context.environment
    context["statements"] = list(config.shared_context.statements)
    if config.shared_context.summary:
        context["summary"] = config.shared_context.summary
    return {
        "format_version": config.format_version,
        "name": config.name,
        "context": context,
        "agents": [
            {
                "name": a.name,
                "gender": a.gender,
                "goal": a.goal,
                "context": a.context,
                "traits": {t: getattr(a.traits, t) for t in TRAIT_NAMES},
                "formative_ages": list(a.formative_ages),
            }
            for a in config.agents
        ],
        "clock": clock,
        "run": {
            "rounds": config.rounds,
            "seed": config.seed,
            "embedding_dim": config.embedding_dim,
            "memory_k": config.memory_k,
        },
        "backend": asdict(config.backend),
        "metrics": [asdict(m) for m in config.metrics],
    }


def serialize_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, allow_unicode=True, width=100)
