"""Episode summaries and the self-contained HTML log of a run."""

from __future__ import annotations

from dataclasses import dataclass
from html import escape

from . import prompts
from .engine import EpisodeLog
from .llm import Backend, CompletionRequest
from .scenario import format_timestamp


@dataclass
class EpisodeSummary:
    news_report: str
    per_agent: dict[str, str]

    def to_dict(self) -> dict:
        return {"news_report": self.news_report, "per_agent": dict(self.per_agent)}

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeSummary":
        return cls(d["news_report"], dict(d["per_agent"]))


def summarize_episode(log: EpisodeLog, backend: Backend) -> EpisodeSummary:
    """One news report from the GM memory, then one first-person account per agent."""
    if not log.events:
        raise ValueError("cannot summarise an episode without events")
    gm_lines = [e.render() for e in log.gm_memory] if log.gm_memory is not None else []
    news = backend.complete(CompletionRequest(user_text=prompts.render_news(gm_lines), tag="report.news"))
    per_agent = {}
    for name in log.agents:
        lines = [f"[{format_timestamp(t)}] {text}" for t, text in log.observations_of(name)]
        per_agent[name] = backend.complete(CompletionRequest(
            user_text=prompts.render_agent_report(name, lines), tag="report.agent"))
    return EpisodeSummary(news, per_agent)


_STYLE = """
body{font-family:Georgia,serif;margin:2em auto;max-width:60em;color:#222;line-height:1.45}
h1,h2,h3{font-family:Helvetica,Arial,sans-serif}
table{border-collapse:collapse;width:100%}
th,td{border:1px solid #ccc;padding:.35em .5em;vertical-align:top;text-align:left}
th{background:#f1f1f1}
td.ts,span.ts{font-family:monospace;white-space:nowrap}
dl.meta dt{font-weight:bold;float:left;clear:left;width:9em}
dl.meta dd{margin-left:10em}
.summary{background:#f8f8f0;border-left:4px solid #bba;padding:.5em 1em;white-space:pre-wrap}
ol.log{padding-left:1.5em}
""".strip()


def _ts(t) -> str:
    return escape(f"[{format_timestamp(t)}]")


def _text(s: str) -> str:
    return escape(s, quote=True)


def render_html(log: EpisodeLog, summary: EpisodeSummary | None = None) -> str:
    """Single-file HTML5 log: header, event table, GM memory, per-agent perspectives."""
    out = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{_text(log.scenario_name)} - episode log</title>",
        f"<style>\n{_STYLE}\n</style>",
        "</head>",
        "<body>",
        '<header id="scenario">',
        f"<h1>{_text(log.scenario_name)}</h1>",
        '<dl class="meta">',
        f"<dt>Config digest</dt><dd><code>{_text(log.config_digest)}</code></dd>",
        f"<dt>Status</dt><dd>{_text(log.status)}</dd>",
    ]
    if log.error:
        out.append(f"<dt>Error</dt><dd>{_text(log.error)}</dd>")
    out += [
        f"<dt>Start</dt><dd>{_ts(log.clock_start)}</dd>",
        f"<dt>Rounds</dt><dd>{log.rounds}</dd>",
        f"<dt>Seed</dt><dd>{log.seed}</dd>",
        f"<dt>Agents</dt><dd>{_text(', '.join(log.agents))}</dd>",
        "</dl>",
    ]
    if log.shared_summary:
        out.append(f'<p class="summary">{_text(log.shared_summary)}</p>')
    if summary is not None:
        out.append("<h2>News report</h2>")
        out.append(f'<div class="summary" id="news-report">{_text(summary.news_report)}</div>')
    out.append("</header>")

    out += [
        '<section id="events">',
        f"<h2>Events ({len(log.events)})</h2>",
        "<table>",
        "<thead><tr><th>Timestamp</th><th>Actor</th><th>Narrative</th></tr></thead>",
        "<tbody>",
    ]
    for e in log.events:
        out.append(f'<tr><td class="ts">{_ts(e.timestamp)}</td><td>{_text(e.actor)}</td>'
                   f"<td>{_text(e.narrative)}</td></tr>")
    out += ["</tbody>", "</table>", "</section>"]

    gm = list(log.gm_memory) if log.gm_memory is not None else []
    out += ['<section id="gm-memory">', f"<h2>Game master memory ({len(gm)})</h2>", '<ol class="log">']
    for m in gm:
        out.append(f'<li><span class="ts">{_ts(m.timestamp)}</span> {_text(m.text)}</li>')
    out += ["</ol>", "</section>"]

    out += ['<section id="perspectives">', "<h2>Perspectives</h2>"]
    for i, name in enumerate(log.agents):
        out.append(f'<section class="agent" id="agent-{i}">')
        out.append(f"<h3>{_text(name)}</h3>")
        if summary is not None and name in summary.per_agent:
            out.append(f'<div class="summary">{_text(summary.per_agent[name])}</div>')
        obs = log.observations_of(name)
        out.append(f"<h4>Observations ({len(obs)})</h4>")
        out.append('<ol class="log">')
        for t, text in obs:
            out.append(f'<li><span class="ts">{_ts(t)}</span> {_text(text)}</li>')
        out.append("</ol>")
        out.append("</section>")
    out += ["</section>", "</body>", "</html>"]
    return "\n".join(out) + "\n"
