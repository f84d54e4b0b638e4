"""Agent runtime and game master loop.

Agents answer three questions in sequence to turn a situation into an intent;
the game master turns each intent into an event and broadcasts it back.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

from . import prompts
from .analytics.metrics import MetricSample, count_events, sample_opinion
from .llm import Backend, CompletionRequest, TranscriptRecord
from .memory import MemoryStore, build_formative_memories
from .scenario import (
    AgentProfile,
    ScenarioConfig,
    SharedContext,
    format_timestamp,
    parse_timestamp,
    serialize_scenario,
)

logger = logging.getLogger(__name__)

LOG_FORMAT_VERSION = 1


@dataclass
class AgentState:
    profile: AgentProfile
    memory: MemoryStore
    pending: list[str] = field(default_factory=list)  # observations since the agent last acted

    @property
    def current_age(self) -> int:
        return self.profile.current_age

    def clone(self) -> "AgentState":
        return AgentState(self.profile, self.memory.copy(), list(self.pending))


@dataclass
class ActionIntent:
    actor: str
    round: int
    timestamp: dt.datetime
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("intent text must be non-empty")


@dataclass
class ResolvedEvent:
    timestamp: dt.datetime
    actor: str
    narrative: str
    observations: dict[str, str]
    round: int = 0
    intent: str = ""

    def to_dict(self) -> dict:
        return {
            "timestamp": format_timestamp(self.timestamp),
            "round": self.round,
            "actor": self.actor,
            "intent": self.intent,
            "narrative": self.narrative,
            "observations": dict(self.observations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResolvedEvent":
        return cls(parse_timestamp(d["timestamp"]), d["actor"], d["narrative"], dict(d["observations"]),
                   d.get("round", 0), d.get("intent", ""))


@dataclass
class EpisodeLog:
    config_digest: str
    scenario_name: str
    agents: list[str]
    clock_start: dt.datetime
    rounds: int
    seed: int
    embedding_dim: int
    shared_summary: str = ""
    events: list[ResolvedEvent] = field(default_factory=list)
    gm_memory: MemoryStore | None = None
    completion_transcript: list[TranscriptRecord] = field(default_factory=list)
    metrics: list[MetricSample] = field(default_factory=list)
    status: str = "complete"
    error: str = ""

    def observations_of(self, name: str) -> list[tuple[dt.datetime, str]]:
        return [(e.timestamp, e.observations[name]) for e in self.events if name in e.observations]

    def to_dict(self) -> dict:
        gm = self.gm_memory.entries if self.gm_memory is not None else ()
        return {
            "log_format_version": LOG_FORMAT_VERSION,
            "template_version": prompts.TEMPLATE_VERSION,
            "status": self.status,
            "error": self.error,
            "scenario_name": self.scenario_name,
            "config_digest": self.config_digest,
            "agents": list(self.agents),
            "clock_start": format_timestamp(self.clock_start),
            "rounds": self.rounds,
            "seed": self.seed,
            "embedding_dim": self.embedding_dim,
            "shared_summary": self.shared_summary,
            "events": [e.to_dict() for e in self.events],
            "gm_memory": [
                {"timestamp": format_timestamp(m.timestamp), "kind": m.kind, "text": m.text} for m in gm
            ],
            "completion_transcript": [
                {"tag": t.tag, "prompt_hash": t.prompt_hash, "response_hash": t.response_hash}
                for t in self.completion_transcript
            ],
            "metrics": [s.to_dict() for s in self.metrics],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeLog":
        gm = MemoryStore(d["embedding_dim"])
        for m in d.get("gm_memory", []):
            gm.add(parse_timestamp(m["timestamp"]), m["text"], m["kind"])
        return cls(
            config_digest=d["config_digest"],
            scenario_name=d["scenario_name"],
            agents=list(d["agents"]),
            clock_start=parse_timestamp(d["clock_start"]),
            rounds=d["rounds"],
            seed=d["seed"],
            embedding_dim=d["embedding_dim"],
            shared_summary=d.get("shared_summary", ""),
            events=[ResolvedEvent.from_dict(e) for e in d.get("events", [])],
            gm_memory=gm,
            completion_transcript=[TranscriptRecord(**t) for t in d.get("completion_transcript", [])],
            metrics=[MetricSample.from_dict(s) for s in d.get("metrics", [])],
            status=d.get("status", "complete"),
            error=d.get("error", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "EpisodeLog":
        return cls.from_dict(json.loads(text))


class EpisodeAborted(Exception):
    """A run stopped early; ``log`` holds everything produced before the failure."""

    def __init__(self, log: EpisodeLog, cause: Exception):
        super().__init__(f"episode aborted after {len(log.events)} events: {cause}")
        self.log = log
        self.cause = cause


def config_digest(config: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_scenario(config).encode("utf-8")).hexdigest()


def summarize_context(shared: SharedContext, backend: Backend) -> str:
    if not shared.statements:
        raise ValueError("shared context has no statements to summarise")
    return backend.complete(CompletionRequest(
        user_text=prompts.render_summary_request(shared.statements),
        tag="context.summary",
    ))


def agent_act(state: AgentState, situation: str, backend: Backend, now: dt.datetime,
              round_index: int = 0, k: int = 8) -> ActionIntent:
    if not situation:
        raise ValueError("situation must be non-empty")
    name = state.profile.name
    system_text = prompts.agent_system(state.profile)
    prior: list[tuple[str, str]] = []
    for tag, question in prompts.AGENT_QUESTIONS:
        memories = state.memory.retrieve(f"{question} {situation}", k, now=now)
        answer = backend.complete(CompletionRequest(
            user_text=prompts.render_agent_question(name, question, situation, memories, prior),
            system_text=system_text,
            tag=tag,
        ))
        prior.append((question, answer))
    intent = prior[-1][1]
    state.memory.add(now, situation, "observation")
    state.memory.add(now, intent, "observation")
    state.pending.clear()
    return ActionIntent(name, round_index, now, intent)


def broadcast(intent: ActionIntent, narrative: str, agent_names: list[str]) -> dict[str, str]:
    return {name: narrative for name in agent_names}


def gm_resolve(intent: ActionIntent, gm_memory: MemoryStore, shared: SharedContext, backend: Backend,
               now: dt.datetime, agent_names: list[str], k: int = 8,
               route: Callable[[ActionIntent, str, list[str]], dict[str, str]] = broadcast) -> ResolvedEvent:
    if intent.actor not in agent_names:
        raise ValueError(f"unknown actor {intent.actor!r}")
    memories = gm_memory.retrieve(intent.text, k, now=now)
    narrative = backend.complete(CompletionRequest(
        user_text=prompts.render_gm_resolve(shared.summary, memories, intent.actor,
                                            format_timestamp(now), intent.text),
        system_text=prompts.GM_SYSTEM,
        tag="gm.resolve",
    ))
    observations = route(intent, narrative, agent_names)
    observations[intent.actor] = narrative
    gm_memory.add(now, f"{intent.actor} -- {narrative}", "observation")
    return ResolvedEvent(now, intent.actor, narrative, observations, intent.round, intent.text)


def build_agents(config: ScenarioConfig, shared: SharedContext, backend: Backend) -> list[AgentState]:
    states = []
    for profile in config.agents:
        store = MemoryStore(config.embedding_dim)
        build_formative_memories(profile, shared, backend, config.clock, store=store)
        states.append(AgentState(profile, store))
    return states


def sample_metrics(config: ScenarioConfig, states: dict[str, AgentState], round_events, backend: Backend,
                   round_index: int, now: dt.datetime) -> list[MetricSample]:
    out = []
    names = config.agent_names
    for spec in config.metrics:
        for subject, target in spec.pairs(names):
            if spec.kind == "opinion":
                out.append(sample_opinion(states[subject], target, backend, round_index, metric=spec.name,
                                          question_template=spec.question_template, k=config.memory_k, now=now))
            else:
                out.append(count_events(round_events, subject, round_index, metric=spec.name))
    return out


def run_episode(config: ScenarioConfig, backend: Backend) -> EpisodeLog:
    """Run one episode to completion; raises ``EpisodeAborted`` with a partial log on failure."""
    first_call = len(backend.transcript)
    shared = replace(config.shared_context, statements=list(config.shared_context.statements))
    log = EpisodeLog(
        config_digest=config_digest(config),
        scenario_name=config.name,
        agents=config.agent_names,
        clock_start=config.clock.start,
        rounds=config.rounds,
        seed=config.seed,
        embedding_dim=config.embedding_dim,
        gm_memory=MemoryStore(config.embedding_dim),
    )
    names = config.agent_names
    n = len(names)
    try:
        if not shared.summary:
            shared.summary = summarize_context(shared, backend)
        log.shared_summary = shared.summary
        states = {s.profile.name: s for s in build_agents(config, shared, backend)}
        for r in range(config.rounds):
            round_events = []
            for i, name in enumerate(names):
                now = config.clock.at_step(r * n + i + 1)
                state = states[name]
                if r == 0 or not state.pending:
                    situation = shared.summary
                else:
                    situation = "\n".join(state.pending)
                intent = agent_act(state, situation, backend, now, r, k=config.memory_k)
                event = gm_resolve(intent, log.gm_memory, shared, backend, now, names, k=config.memory_k)
                for observer, text in event.observations.items():
                    states[observer].memory.add(now, text, "observation")
                    states[observer].pending.append(f"[{format_timestamp(now)}] {text}")
                log.events.append(event)
                round_events.append(event)
            end = config.clock.at_step((r + 1) * n)
            log.metrics.extend(sample_metrics(config, states, round_events, backend, r, end))
            logger.info("round %d/%d done (%d events)", r + 1, config.rounds, len(log.events))
    except Exception as exc:
        log.status = "partial"
        log.error = f"{type(exc).__name__}: {exc}"
        log.completion_transcript = list(backend.transcript[first_call:])
        raise EpisodeAborted(log, exc) from exc
    log.completion_transcript = list(backend.transcript[first_call:])
    return log
