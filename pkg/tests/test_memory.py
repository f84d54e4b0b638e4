import datetime as dt
import math
import random
from dataclasses import replace
from functools import reduce
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gabm.llm import ScriptedBackend, load_script
from gabm.memory import (
    MemoryStore,
    build_formative_memories,
    context_items,
    cosine,
    embed,
    formative_timestamp,
    parse_dump,
    render_dump,
)
from gabm.scenario import SharedContext, SimClock, format_timestamp

FIXTURES = Path(__file__).parent / "fixtures"

# Order in which the recorded Dana listing shows the same-timestamp context
# block, as indices into context_items(): 0 existence statement, 1-9 the shared
# statements in file order, 10 summary + role, 11 goal.
DANA_LISTING_ORDER = [2, 3, 4, 0, 9, 8, 1, 10, 11, 7, 6, 5]
DANA_LISTING_GOAL = "Engage with interesting content daily and share posts that resonate with your friends."


def ref_fnv(token: str) -> int:
    return reduce(lambda h, c: ((h ^ c) * 0x100000001B3) % 2**64, token.encode(), 0xCBF29CE484222325)


def test_embed_empty_is_zero():
    assert embed("", 16) == (0.0,) * 16
    assert embed("  ...  !!", 16) == (0.0,) * 16


def test_embed_deterministic_case_folded():
    assert embed("A b", 32) == embed("a B", 32)
    assert embed("Trending topics", 64) == embed("Trending topics", 64)


def test_embed_connectnet_vector():
    # 052dbaea8672866c from an independent reduce-based FNV-1a: index 54, sign -
    assert ref_fnv("connectnet") == 0x052DBAEA8672866C
    v = embed("ConnectNet", 64)
    assert v[54] == -1.0
    assert sum(abs(x) for x in v) == 1.0


def test_embed_against_reference_formula():
    text = "Users on ConnectNet often follow trends based on viral content."
    dim = 24
    counts = [0] * dim
    for tok in text.lower().replace(".", " ").split():
        h = ref_fnv(tok)
        counts[(h >> 1) % dim] += 1 if h & 1 else -1
    n = math.sqrt(sum(c * c for c in counts))
    assert embed(text, dim) == pytest.approx([c / n for c in counts], abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80), st.integers(1, 128))
def test_embed_unit_norm(text, dim):
    v = embed(text, dim)
    n = math.sqrt(sum(x * x for x in v))
    assert n == 0.0 or abs(n - 1.0) < 1e-6


def test_add_ids_and_empty_rejection():
    store = MemoryStore(8)
    t = dt.datetime(2024, 1, 1)
    assert store.add(t, "first") == 0
    assert len(store) == 1
    assert store.add(t, "second") == 1
    assert [e.id for e in store] == [0, 1]
    with pytest.raises(ValueError):
        store.add(t, "")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=20), min_size=1, max_size=20))
def test_store_append_only(texts):
    store = MemoryStore(16)
    t = dt.datetime(2024, 1, 1)
    snapshots = []
    for text in texts:
        store.add(t, text)
        snapshots.append(store.entries)
    final = store.entries
    for snap in snapshots:
        assert final[: len(snap)] == snap


def test_retrieve_single_and_empty():
    store = MemoryStore(8)
    assert store.retrieve("anything", 3) == []
    store.add(dt.datetime(2024, 1, 1), "only one")
    assert [e.text for e in store.retrieve("unrelated words", 5)] == ["only one"]


def test_retrieve_exact_text_first():
    store = MemoryStore(64)
    t = dt.datetime(2024, 1, 1)
    for s in ["the cat sat", "dogs bark loudly", "ConnectNet trends go viral", "misinformation spreads"]:
        store.add(t, s)
    assert store.retrieve("ConnectNet trends go viral", 2)[0].text == "ConnectNet trends go viral"


def test_ties_prefer_newer_then_higher_id():
    store = MemoryStore(16)
    t0 = dt.datetime(2024, 1, 1)
    store.add(t0, "same words")            # id 0
    store.add(t0 + dt.timedelta(1), "same words")  # id 1, newer
    store.add(t0, "same words")            # id 2, older than 1 but higher id than 0
    assert [e.id for e in store.retrieve("same words", 3)] == [1, 2, 0]


def test_recency_weighting():
    store = MemoryStore(16, alpha=0.5, tau=3600.0)
    t0 = dt.datetime(2024, 1, 1)
    store.add(t0, "red apple")
    store.add(t0 + dt.timedelta(hours=10), "green apple")
    now = t0 + dt.timedelta(hours=10)
    # similarities equal (one shared token each); recency decides
    assert store.retrieve("apple", 1, now=now)[0].text == "green apple"


def brute_force(store, query, k):
    """Independent oracle: score everything, full sort with the documented tie rule."""
    q = embed(query, store.dim)
    scored = []
    for e in store:
        nq = math.sqrt(sum(x * x for x in q))
        ne = math.sqrt(sum(x * x for x in e.embedding))
        cos = 0.0 if nq == 0 or ne == 0 else sum(a * b for a, b in zip(q, e.embedding)) / (nq * ne)
        scored.append((cos, e.timestamp, e.id))
    scored.sort(reverse=True)
    return [i for _, _, i in scored[:k]]


def random_store(rng, n, dim=64):
    vocab = [f"w{i}" for i in range(40)]
    store = MemoryStore(dim)
    t0 = dt.datetime(2024, 1, 1)
    for _ in range(n):
        words = rng.choices(vocab, k=rng.randint(0, 5))
        text = " ".join(words) or "?"
        store.add(t0 + dt.timedelta(minutes=rng.randint(0, 30)), text)
    return store, vocab


def test_retrieve_matches_brute_force():
    rng = random.Random(99)
    store, vocab = random_store(rng, 200)
    for _ in range(50):
        query = " ".join(rng.choices(vocab, k=rng.randint(1, 4)))
        assert [e.id for e in store.retrieve(query, 10)] == brute_force(store, query, 10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 300), st.integers(1, 20))
def test_retrieve_oracle_property(seed, n, k):
    rng = random.Random(seed)
    store, vocab = random_store(rng, n, dim=rng.choice([4, 16, 64]))
    query = " ".join(rng.choices(vocab, k=3))
    assert [e.id for e in store.retrieve(query, k)] == brute_force(store, query, k)


def test_cosine_zero_vector():
    assert cosine((0.0, 0.0), (1.0, 0.0)) == 0.0


def test_dump_round_trip():
    text = (FIXTURES / "dana_memory.txt").read_text(encoding="utf-8")
    parsed = parse_dump(text)
    assert len(parsed) == 18
    store = MemoryStore(64)
    for t, s in parsed:
        store.add(t, s, "context")
    assert len(store) == 18
    assert store.dump() == text


# --- formative memories ----------------------------------------------------


def dana_inputs(connectnet):
    listing = parse_dump((FIXTURES / "dana_memory.txt").read_text(encoding="utf-8"))
    role_entry = listing[13][1]
    dana = connectnet.agent("Dana")
    assert role_entry.endswith(" " + dana.context)
    shared = replace(connectnet.shared_context, summary=role_entry[: -len(dana.context) - 1])
    return replace(dana, goal=DANA_LISTING_GOAL), shared


def test_dana_formative_timestamps(connectnet):
    dana = connectnet.agent("Dana")
    stamps = [format_timestamp(formative_timestamp(connectnet.clock, dana, a)) for a in dana.formative_ages]
    assert stamps == ["03 Jul 1990 00:00:00", "03 Jul 2000 00:00:00", "03 Jul 2011 00:00:00",
                      "03 Jul 2012 00:00:00", "03 Jul 2022 00:00:00"]


def test_default_birth_year_rule():
    from gabm.scenario import AgentProfile, TraitVector
    p = AgentProfile("X", "", "g", "c", TraitVector(1, 1, 1, 1, 1), [6, 16, 27, 28, 38])
    clock = SimClock(dt.datetime(2024, 10, 1, 20))
    assert formative_timestamp(clock, p, 38) == dt.datetime(2024, 7, 3)
    assert formative_timestamp(clock, p, 6) == dt.datetime(1992, 7, 3)


def test_dana_entry_count_and_kinds(connectnet):
    dana, shared = dana_inputs(connectnet)
    backend = ScriptedBackend(load_script(FIXTURES / "dana.script"))
    entries = build_formative_memories(dana, shared, backend, connectnet.clock)
    assert len(entries) == 18
    kinds = [e.kind for e in entries]
    assert kinds[:6] == ["formative"] * 5 + ["self_summary"]
    assert kinds.count("goal") == 1 and kinds.count("context") == 11
    assert [r.tag for r in backend.transcript] == ["memory.formative"] * 5 + ["memory.self_summary"]


def test_dana_listing_reproduced(connectnet):
    dana, shared = dana_inputs(connectnet)
    backend = ScriptedBackend(load_script(FIXTURES / "dana.script"))
    entries = build_formative_memories(dana, shared, backend, connectnet.clock, context_order=DANA_LISTING_ORDER)
    assert render_dump(entries) == (FIXTURES / "dana_memory.txt").read_text(encoding="utf-8")


def test_formative_deterministic(connectnet):
    dana, shared = dana_inputs(connectnet)
    dumps = []
    for _ in range(2):
        backend = ScriptedBackend(load_script(FIXTURES / "dana.script"))
        dumps.append(render_dump(build_formative_memories(dana, shared, backend, connectnet.clock)).encode())
    assert dumps[0] == dumps[1]


def test_formative_before_start_and_increasing(connectnet):
    shared = replace(connectnet.shared_context, summary="S.")
    for agent in connectnet.agents:
        entries = build_formative_memories(agent, shared, ScriptedBackend(exhaustion_mode="echo"), connectnet.clock)
        stamps = [e.timestamp for e in entries if e.kind == "formative"]
        if len(set(agent.formative_ages)) == 5:
            assert stamps == sorted(stamps) and len(set(stamps)) == 5
        assert all(s < connectnet.clock.start for s in stamps)


def test_context_items_canonical_order():
    shared = SharedContext(["A.", "B."], environment="place called Here", summary="Sum.")
    from gabm.scenario import AgentProfile, TraitVector
    p = AgentProfile("X", "", "Goal.", "Role.", TraitVector(1, 1, 1, 1, 1), [5, 6, 7, 8, 9])
    assert context_items(p, shared) == [("context", "There is a place called Here."), ("context", "A."),
                                        ("context", "B."), ("context", "Sum. Role."), ("goal", "Goal.")]


def test_summary_required(connectnet):
    with pytest.raises(ValueError):
        build_formative_memories(connectnet.agents[0], connectnet.shared_context, ScriptedBackend(["x"]),
                                 connectnet.clock)


def test_bad_context_order(connectnet):
    dana, shared = dana_inputs(connectnet)
    with pytest.raises(ValueError):
        build_formative_memories(dana, shared, ScriptedBackend(exhaustion_mode="echo"), connectnet.clock,
                                 context_order=[0, 1])
