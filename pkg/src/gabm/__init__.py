"""Generative agent-based modeling: scenarios, LLM backends, memory, a game master loop and analytics."""

from .engine import EpisodeAborted, EpisodeLog, run_episode
from .llm import BackendSettings, CompletionRequest, HttpBackend, ScriptedBackend, make_backend
from .memory import MemoryStore, build_formative_memories, embed
from .scenario import ScenarioConfig, load_scenario, parse_scenario, serialize_scenario, validate_scenario

__version__ = "0.1.0"

__all__ = [
    "BackendSettings",
    "CompletionRequest",
    "EpisodeAborted",
    "EpisodeLog",
    "HttpBackend",
    "MemoryStore",
    "ScenarioConfig",
    "ScriptedBackend",
    "build_formative_memories",
    "embed",
    "load_scenario",
    "make_backend",
    "parse_scenario",
    "run_episode",
    "serialize_scenario",
    "validate_scenario",
]
