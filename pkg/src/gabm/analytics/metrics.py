"""Per-round measurements taken during an episode."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .. import prompts
from ..llm import Backend, CompletionRequest

METRIC_KINDS = ("opinion", "event_count")
OPINION_ATTEMPTS = 3
WILDCARD = "*"

# A reply counts as an answer when, after optional whitespace, it starts with a
# single digit that is not immediately followed by another digit.
_LEADING_DIGIT = re.compile(r"\s*([0-9])(?![0-9])")


@dataclass
class MetricSpec:
    name: str
    kind: str = "opinion"
    subject: str = WILDCARD
    target: str = WILDCARD
    question_template: str = prompts.OPINION_QUESTION

    def violations(self, agent_names: list[str], prefix: str) -> list[tuple[str, str]]:
        out = []
        if not self.name:
            out.append((f"{prefix}.name", "must be non-empty"))
        if self.kind not in METRIC_KINDS:
            out.append((f"{prefix}.kind", f"must be one of {', '.join(METRIC_KINDS)}"))
        if self.subject != WILDCARD and self.subject not in agent_names:
            out.append((f"{prefix}.subject", f"unknown agent {self.subject!r}"))
        if self.kind == "opinion":
            if self.target != WILDCARD and self.target not in agent_names:
                out.append((f"{prefix}.target", f"unknown agent {self.target!r}"))
            if self.subject != WILDCARD and self.subject == self.target:
                out.append((f"{prefix}.target", "must differ from subject"))
            if not self.question_template:
                out.append((f"{prefix}.question_template", "required for opinion metrics"))
        return out

    def pairs(self, agent_names: list[str]) -> list[tuple[str, str]]:
        """Concrete (subject, target) pairs this metric expands to, in agent order."""
        subjects = agent_names if self.subject == WILDCARD else [self.subject]
        if self.kind == "event_count":
            return [(s, "") for s in subjects]
        targets = agent_names if self.target == WILDCARD else [self.target]
        return [(s, t) for s in subjects for t in targets if s != t]


@dataclass
class MetricSample:
    metric: str
    round: int
    subject: str
    target: str
    value: float | None
    missing: bool = False

    @property
    def key(self) -> str:
        if self.target:
            return f"{self.metric}[{self.subject}->{self.target}]"
        return f"{self.metric}[{self.subject}]"

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "round": self.round,
            "subject": self.subject,
            "target": self.target,
            "value": self.value,
            "missing": self.missing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricSample":
        return cls(**data)


def parse_opinion(reply: str) -> int | None:
    m = _LEADING_DIGIT.match(reply)
    return int(m.group(1)) if m else None


def sample_opinion(subject, target: str, backend: Backend, round_index: int,
                   metric: str = "opinion", question_template: str = prompts.OPINION_QUESTION,
                   k: int = 8, now=None) -> MetricSample:
    """Ask ``subject`` (an AgentState) to rate ``target`` on the 0..9 scale.

    Unparseable replies are re-asked; after ``OPINION_ATTEMPTS`` failures the
    sample is marked missing. Transport errors propagate.
    """
    name = subject.profile.name
    if name == target:
        raise ValueError("subject and target must differ")
    memories = subject.memory.retrieve(target, k, now=now)
    question = question_template.format(subject=name, target=target)
    user_text = prompts.render_opinion(question, target, memories)
    system_text = prompts.agent_system(subject.profile)
    for attempt in range(OPINION_ATTEMPTS):
        text = user_text if attempt == 0 else user_text + prompts.OPINION_REASK
        reply = backend.complete(CompletionRequest(user_text=text, system_text=system_text,
                                                   tag="metric.opinion"))
        value = parse_opinion(reply)
        if value is not None:
            return MetricSample(metric, round_index, name, target, float(value))
    return MetricSample(metric, round_index, name, target, None, missing=True)


def count_events(events, subject: str, round_index: int, metric: str = "events") -> MetricSample:
    """Number of events in ``events`` acted by ``subject``."""
    n = sum(1 for e in events if e.actor == subject)
    return MetricSample(metric, round_index, subject, "", float(n))
