"""Command line: init, validate, run, report, bench.

Exit codes: 0 ok, 1 invalid scenario or input, 2 backend failure,
3 internal error, 4 bench comparison failed. Failures also print one JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import copy
import importlib.resources
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analytics.bench import run_many, write_metrics_csv
from .analytics.stats import aggregate, compare, load_reference, reference_statistics, split_reference
from .engine import EpisodeAborted, EpisodeLog, run_episode
from .llm import BackendError, make_backend
from .reporting import EpisodeSummary, render_html, summarize_episode
from .scenario import ScenarioError, ScenarioValidationError, config_from_dict, load_document

logger = logging.getLogger("gabm")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BACKEND = 2
EXIT_INTERNAL = 3
EXIT_COMPARISON = 4

TEMPLATES = ("connectnet", "blank")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _fail_json(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": message}), file=sys.stderr)
    return code


def template_text(name: str) -> str:
    return (importlib.resources.files("gabm") / "templates" / f"{name}.scenario").read_text(encoding="utf-8")


# --- scenario loading with overrides ----------------------------------------


def _apply_overrides(data: dict, args, seed: int | None = None) -> dict:
    data = copy.deepcopy(data) if isinstance(data, dict) else data
    if not isinstance(data, dict):
        return data
    run = data.setdefault("run", {}) or {}
    data["run"] = run
    if seed is not None:
        run["seed"] = seed
    elif getattr(args, "seed", None) is not None:
        run["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        run["rounds"] = args.rounds
    backend = data.get("backend") or {}
    kind = getattr(args, "backend", None) or ("scripted" if getattr(args, "script", None) else None)
    if kind and kind != backend.get("kind"):
        backend = {"kind": kind}
    if getattr(args, "script", None):
        backend["script_path"] = str(Path(args.script).resolve())
        backend.setdefault("exhaustion_mode", "error")
    if getattr(args, "exhaustion", None):
        backend["exhaustion_mode"] = args.exhaustion
    for flag, key in (("model", "model_name"), ("base_url", "base_url"), ("api_key_env", "api_key_env_var")):
        if getattr(args, flag, None):
            backend[key] = getattr(args, flag)
    data["backend"] = backend
    return data


def _load(args, seed: int | None = None):
    path = Path(args.scenario)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_INVALID, "io", f"cannot read {path}: {exc}") from exc
    try:
        return config_from_dict(_apply_overrides(load_document(text), args, seed))
    except ScenarioError as exc:
        raise CliError(EXIT_INVALID, "validation", str(exc)) from exc


def _backend_factory(config, scenario_path):
    base_dir = Path(scenario_path).resolve().parent

    def factory():
        return make_backend(config.backend, base_dir=base_dir)

    return factory


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe_name(name: str) -> str:
    cleaned = "".join(c if c.isalnum() or c in "-_." else "_" for c in name).strip(".")
    return cleaned or "run"


# --- commands ---------------------------------------------------------------


def cmd_init(args) -> int:
    target = Path(args.target)
    path = target / f"{args.template}.scenario" if target.is_dir() or not target.suffix else target
    if path.exists() and not args.force:
        raise CliError(EXIT_INVALID, "exists", f"{path} already exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(template_text(args.template), encoding="utf-8")
    print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load(args)
    print(f"valid: {config.name} ({len(config.agents)} agents, {config.rounds} rounds)")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load(args)
    try:
        backend = _backend_factory(config, args.scenario)()
    except (BackendError, OSError) as exc:
        raise CliError(EXIT_BACKEND, "backend", str(exc)) from exc
    out = _out_dir(args)
    name = _safe_name(args.name or config.name)
    log_path = out / f"{name}.json"
    try:
        log = run_episode(config, backend)
    except EpisodeAborted as exc:
        partial = out / f"{name}.json.partial"
        partial.write_text(exc.log.to_json(), encoding="utf-8")
        if isinstance(exc.cause, BackendError):
            raise CliError(EXIT_BACKEND, "backend", f"{exc} (partial log: {partial})") from exc
        raise CliError(EXIT_INTERNAL, "internal", f"{exc} (partial log: {partial})") from exc
    summary = None
    if args.summarize:
        try:
            summary = summarize_episode(log, backend)
        except BackendError as exc:
            raise CliError(EXIT_BACKEND, "backend", str(exc)) from exc
        (out / f"{name}.summary.json").write_text(
            json.dumps(summary.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    log_path.write_text(log.to_json(), encoding="utf-8")
    with open(out / f"{name}.metrics.csv", "w", encoding="utf-8", newline="") as fh:
        write_metrics_csv(fh, [(0, log)])
    (out / f"{name}.html").write_text(render_html(log, summary), encoding="utf-8")
    print(f"{config.name}: {len(log.events)} events, {len(log.completion_transcript)} completions -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.episode)
    try:
        log = EpisodeLog.from_json(path.read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(EXIT_INVALID, "io", f"cannot load episode log {path}: {exc}") from exc
    summary = None
    if args.summary_file:
        summary = EpisodeSummary.from_dict(json.loads(Path(args.summary_file).read_text(encoding="utf-8")))
    elif args.summarize:
        if not args.scenario:
            raise CliError(EXIT_INVALID, "usage", "--summarize needs --scenario for backend settings")
        config = _load(args)
        try:
            summary = summarize_episode(log, _backend_factory(config, args.scenario)())
        except (BackendError, ValueError) as exc:
            raise CliError(EXIT_BACKEND if isinstance(exc, BackendError) else EXIT_INVALID, "backend", str(exc)) from exc
    out = _out_dir(args)
    name = path.name.removesuffix(".partial").removesuffix(".json")
    html_path = out / f"{_safe_name(name)}.html"
    html_path.write_text(render_html(log, summary), encoding="utf-8")
    print(html_path)
    return EXIT_OK


def _tolerances(items) -> dict[str, float]:
    out = {}
    for item in items or ():
        metric, sep, value = item.rpartition("=")
        if not sep or not metric:
            raise CliError(EXIT_INVALID, "usage", f"--tol expects METRIC=VALUE, got {item!r}")
        out[metric] = float(value)
    return out


def cmd_bench(args) -> int:
    if args.runs < 1:
        raise CliError(EXIT_INVALID, "usage", "--runs must be >= 1")
    first = _load(args)
    try:
        reference = load_reference(args.reference, split_seed=args.split_seed)
        if args.subset != "all":
            cal, val = split_reference(reference, args.split_fraction)
            reference = cal if args.subset == "calibration" else val
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_INVALID, "reference", str(exc)) from exc
    base_seed = first.seed if args.base_seed is None else args.base_seed

    def config_for(seed):
        return _load(args, seed=seed)

    outcomes = run_many(config_for, _backend_factory(first, args.scenario), args.runs, base_seed, args.workers)
    logs = [o.log for o in outcomes if o.ok]
    out = _out_dir(args)
    with open(out / "bench.metrics.csv", "w", encoding="utf-8", newline="") as fh:
        write_metrics_csv(fh, [(o.index, o.log) for o in outcomes if o.ok])
    failures = [{"run": o.index, "seed": o.seed, "error": o.error} for o in outcomes if not o.ok]
    if not logs:
        raise CliError(EXIT_BACKEND, "backend", f"all {args.runs} runs failed: {failures[0]['error']}")
    stats = aggregate(logs, declared=[m.name for m in first.metrics])
    report = compare(stats, reference_statistics(reference), _tolerances(args.tol), args.tolerance)
    text = report.render()
    if failures:
        text += f"failed runs: {len(failures)} of {args.runs}\n"
    (out / "bench.report.txt").write_text(text, encoding="utf-8")
    (out / "bench.stats.json").write_text(json.dumps(
        {"runs": args.runs, "base_seed": base_seed, "failures": failures, "statistics": stats.to_dict(),
         "passed": report.passed, "failing": report.failing()}, indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_COMPARISON


# --- argument parsing -------------------------------------------------------


def _backend_flags(p):
    g = p.add_argument_group("backend overrides")
    g.add_argument("--backend", choices=("scripted", "http"), help="backend kind to use instead of the scenario's")
    g.add_argument("--script", help="script file for the scripted backend")
    g.add_argument("--exhaustion", choices=("error", "echo"), help="what the scripted backend does when out of entries")
    g.add_argument("--model", help="model name for the http backend")
    g.add_argument("--base-url", help="chat-completion base URL, e.g. https://api.mistral.ai/v1")
    g.add_argument("--api-key-env", help="environment variable holding the API key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gabm", description="Generative agent-based modeling experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write a scenario template")
    p.add_argument("target", help="directory (or .scenario path) to write")
    p.add_argument("--template", choices=TEMPLATES, default="blank")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("scenario")
    p.add_argument("-o", "--output-dir", default="out")
    p.add_argument("--name", help="artifact base name (default: scenario name)")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--summarize", action="store_true", help="also write news and per-agent summaries")
    _backend_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="render the HTML log of a saved episode")
    p.add_argument("episode", help="episode log JSON (a .partial log works too)")
    p.add_argument("-o", "--output-dir", default="out")
    p.add_argument("--summary-file", help="summary JSON written by 'run --summarize'")
    p.add_argument("--summarize", action="store_true", help="generate summaries now (needs --scenario)")
    p.add_argument("--scenario", help="scenario providing backend settings for --summarize")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    _backend_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="repeat runs and compare statistics against reference data")
    p.add_argument("scenario")
    p.add_argument("-n", "--runs", type=int, default=5)
    p.add_argument("--reference", required=True, help="CSV of metric,value records")
    p.add_argument("--tolerance", type=float, default=0.5, help="default absolute tolerance on means")
    p.add_argument("--tol", action="append", metavar="METRIC=VALUE", help="per-metric tolerance")
    p.add_argument("--base-seed", type=int, help="seed of run 0 (default: the scenario seed)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--subset", choices=("all", "calibration", "validation"), default="all")
    p.add_argument("--split-fraction", type=float, default=0.5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("-o", "--output-dir", default="out")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    _backend_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        return _fail_json(exc.code, exc.kind, str(exc))
    except ScenarioValidationError as exc:
        return _fail_json(EXIT_INVALID, "validation", str(exc))
    except BackendError as exc:
        return _fail_json(EXIT_BACKEND, "backend", str(exc))
    except Exception as exc:  # noqa: BLE001 - every failure must map to an exit code
        logger.debug("internal error", exc_info=True)
        return _fail_json(EXIT_INTERNAL, "internal", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
