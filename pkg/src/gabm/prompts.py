"""Prompt templates, kept in one place so experiments can be audited and diffed.

Bump TEMPLATE_VERSION whenever any wording here changes; it is written into
every episode log.
"""

TEMPLATE_VERSION = "1"

SUMMARY_INSTRUCTION = "Summarize the characteristics in a concise and insightful fashion"

SITUATION_QUESTION = "What kind of situation is this?"
IDENTITY_QUESTION = "What kind of person am I?"
ACTION_QUESTION = "What does a person like me do in a situation like this?"
AGENT_QUESTIONS = (
    ("agent.situation", SITUATION_QUESTION),
    ("agent.identity", IDENTITY_QUESTION),
    ("agent.action", ACTION_QUESTION),
)

OPINION_QUESTION = "How does {subject} feel about {target}?"
OPINION_REASK = "\n\nReply with a single digit from 0 to 9 and nothing before it."


def _memory_block(memories) -> str:
    if not memories:
        return "(none)"
    return "\n".join(e.render() for e in memories)


def agent_system(profile) -> str:
    return (
        f"You are {profile.name} ({profile.gender}, {profile.current_age} years old). "
        f"Personality on a 1-10 scale: {profile.traits.describe()}. "
        f"Your role: {profile.context} Your goal: {profile.goal}"
    )


def render_summary_request(statements) -> str:
    lines = "\n".join(f"- {s}" for s in statements)
    return f"{SUMMARY_INSTRUCTION}\n\n{lines}"


def render_formative(profile, age: int, shared_summary: str) -> str:
    return (
        f"Write one formative memory from when {profile.name} was {age} years old. "
        "It should be a short third-person paragraph consistent with the character below.\n\n"
        f"Name: {profile.name}\nGender: {profile.gender}\n"
        f"Personality (1-10): {profile.traits.describe()}\n"
        f"Role: {profile.context}\nGoal: {profile.goal}\n"
        f"World: {shared_summary}"
    )


def render_self_summary(profile, now_text: str, episodes) -> str:
    return (
        f"It is {now_text}. {profile.name} is {profile.current_age} years old. "
        f"Based on the formative memories below, describe who {profile.name} is today "
        "in one paragraph.\n\n"
        f"Role: {profile.context}\nGoal: {profile.goal}\n\n"
        f"Formative memories:\n{_memory_block(episodes)}"
    )


def render_agent_question(name: str, question: str, situation: str, memories, prior) -> str:
    parts = [f"Situation:\n{situation}", f"Relevant memories of {name}:\n{_memory_block(memories)}"]
    for q, a in prior:
        parts.append(f"Q: {q}\nA: {a}")
    parts.append(f"Answer as {name}, in the first person.\nQ: {question}")
    return "\n\n".join(parts)


GM_SYSTEM = (
    "You are the game master of a social simulation. Decide what actually happens when a "
    "player attempts an action, and narrate the outcome in the third person."
)


def render_gm_resolve(summary: str, memories, actor: str, timestamp: str, intent: str) -> str:
    return (
        f"World:\n{summary}\n\n"
        f"Recent events:\n{_memory_block(memories)}\n\n"
        f"[{timestamp}] {actor} attempts: {intent}\n\n"
        f"What happens as a result? Begin the narrative with {actor}'s name."
    )


def render_opinion(question: str, target: str, memories) -> str:
    options = "\n".join(
        f"{i} = {label}"
        for i, label in enumerate(
            ("strongly negative", "very negative", "negative", "somewhat negative", "slightly negative",
             "slightly positive", "somewhat positive", "positive", "very positive", "strongly positive")
        )
    )
    return (
        f"Memories about {target}:\n{_memory_block(memories)}\n\n"
        f"{question}\nChoose one option:\n{options}\nAnswer with the digit only."
    )


NEWS_INSTRUCTION = (
    "Write a news report covering the events above, in chronological order, "
    "as a journalist who witnessed them."
)


def render_news(gm_lines) -> str:
    return "Game master record:\n" + "\n".join(gm_lines) + "\n\n" + NEWS_INSTRUCTION


def render_agent_report(name: str, observation_lines) -> str:
    body = "\n".join(observation_lines) or "(nothing observed)"
    return (
        f"What {name} observed:\n{body}\n\n"
        f"Narrate the episode from {name}'s perspective, in the first person."
    )
