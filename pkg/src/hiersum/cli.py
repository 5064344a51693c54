"""Command-line entry point: segment, summarize, evaluate, coverage.

Exit codes are uniform across subcommands: 0 for success, 1 for partial
or quality failures (per-file parse diagnostics, failed summaries,
incomplete coverage), 2 for fatal configuration or protocol errors.
Bad flags and missing paths also exit 2 via the usual usage-error path.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import click

from .backend import Backend, BackendError, ProtocolError
from .config import (
    LEVELS,
    ConfigError,
    build_run_config,
    grounding_context,
    load_config_file,
)
from .evaluation import (
    build_coverage_report,
    coverage_audit,
    evaluate_pairs,
    judge,
)
from .pipeline import make_backend, run_full
from .prompts import PromptStyle
from .segmenter import build_repo_model, repo_model_to_dump

API_KEY_ENV = "HIERSUM_API_KEY"

METRIC_NAMES = ("rouge", "bleu", "semsim", "judge")

_METRIC_FIELDS = {
    "rouge": ("rouge_l_precision", "rouge_l_recall", "rouge_l_f1"),
    "bleu": ("bleu",),
    "semsim": ("semantic_similarity",),
}


def _fail(message: str, code: int = 2) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@click.group()
def main() -> None:
    """Hierarchical summarization of Java repositories with local LLMs."""


# --- segment ----------------------------------------------------------------


@main.command("segment")
@click.argument("repo_path", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--out",
    "out_path",
    default="segments.json",
    show_default=True,
    help="Where to write the segment dump JSON.",
)
@click.option(
    "--include-text",
    is_flag=True,
    help="Embed the verbatim source text of every segment in the dump.",
)
def cmd_segment(repo_path: str, out_path: str, include_text: bool) -> None:
    """Parse REPO_PATH and dump its typed code segments.

    Prints one line of per-kind counts; exits 1 when any file produced
    parse diagnostics (the dump still covers every parseable file).
    """
    model = build_repo_model(Path(repo_path))
    _write_json(Path(out_path), repo_model_to_dump(model, include_text=include_text))

    counts = model.kind_counts()
    click.echo(
        "functions={function} variables={variable} constructors={constructor} "
        "enums={enum} interfaces={interface}".format(**counts)
        + f" packages={len(model.packages)} files={len(model.files)}"
    )
    if model.diagnostics:
        for diag in model.diagnostics:
            click.echo(f"warning: {diag.path}: {diag.message}", err=True)
        sys.exit(1)


# --- summarize --------------------------------------------------------------


def _config_options(command):
    """Shared backend/pipeline flags; None means "defer to config file"."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML configuration file."),
        click.option("--backend-url", help="Base URL of the OpenAI-compatible server."),
        click.option("--model", help="Chat model identifier."),
        click.option("--embedding-model", help="Embedding model identifier."),
        click.option("--mock", "mock_mode", is_flag=True, default=None, help="Use the deterministic offline mock backend."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@main.command("summarize")
@click.argument("repo_path", type=click.Path(exists=True, file_okay=False))
@_config_options
@click.option(
    "--prompt-style",
    type=click.Choice([style.value for style in PromptStyle]),
    help="Function prompt style.",
)
@click.option("--grounding-domain", type=click.Path(dir_okay=False), help="Domain description text file (requires --grounding-problem).")
@click.option("--grounding-problem", type=click.Path(dir_okay=False), help="Problem context text file (requires --grounding-domain).")
@click.option("--concurrency", type=int, help="Maximum in-flight backend requests.")
@click.option("--max-prompt-chars", type=int, help="Fold prompts larger than this many characters.")
@click.option("--cache-dir", help="Summary cache directory.")
@click.option("--out", "out_dir", help="Output tree directory.")
@click.option(
    "--level",
    type=click.Choice(list(LEVELS)),
    help="Stop the hierarchy at this level.",
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["json", "markdown"]),
    default="json",
    show_default=True,
    help="markdown additionally writes human-readable .md mirrors.",
)
def cmd_summarize(
    repo_path: str,
    config_path: Optional[str],
    output_format: str,
    **flags,
) -> None:
    """Summarize REPO_PATH bottom-up and write the output tree."""
    try:
        file_values = load_config_file(config_path) if config_path else None
        config = build_run_config(
            file_values, api_key=os.environ.get(API_KEY_ENV), **flags
        )
        grounding_context(config)  # surface unreadable grounding files early
    except ConfigError as exc:
        _fail(str(exc))
    try:
        report = run_full(repo_path, config, markdown=output_format == "markdown")
    except (ConfigError, ProtocolError, OSError) as exc:
        _fail(str(exc))
    click.echo(
        " ".join(f"{key}={value}" for key, value in sorted(report.counts.items()))
        + f" completions={report.completions_issued} cache_hits={report.cache_hits}"
    )
    click.echo(f"output tree: {report.out_dir}")
    for diag in report.diagnostics:
        click.echo(f"warning: {diag}", err=True)
    if report.failures:
        for failure in report.failures:
            click.echo(
                "failed: {level} {path} {kind} {name}".format(**failure), err=True
            )
        sys.exit(1)
    if report.diagnostics:
        sys.exit(1)


# --- evaluate ---------------------------------------------------------------


def _load_pairs(path: str) -> list:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read pairs file {path}: {exc}")
    if not isinstance(data, list):
        _fail(f"pairs file {path} must hold a JSON list")
    return data


@main.command("evaluate")
@click.argument("pairs_path", type=click.Path(exists=True, dir_okay=False))
@_config_options
@click.option(
    "--metrics",
    default="rouge,bleu",
    show_default=True,
    help="Comma-separated subset of rouge,bleu,semsim,judge.",
)
@click.option(
    "--judge-samples",
    type=int,
    default=1,
    show_default=True,
    help="Completions per judge criterion.",
)
@click.option(
    "--out",
    "out_path",
    default="metrics.json",
    show_default=True,
    help="Where to write the metric JSON.",
)
def cmd_evaluate(
    pairs_path: str,
    config_path: Optional[str],
    metrics: str,
    judge_samples: int,
    out_path: str,
    **flags,
) -> None:
    """Score candidate/reference PAIRS_PATH records.

    The pairs file is a JSON list of {"id", "candidate", "reference"}
    objects.  semsim and judge need a backend (--backend-url or --mock);
    the mock can embed but cannot judge.  Judge scores treat the
    candidate as the summary and the reference as its source.
    """
    selected = [name.strip() for name in metrics.split(",") if name.strip()]
    unknown = sorted(set(selected) - set(METRIC_NAMES))
    if unknown or not selected:
        _fail(
            f"unknown metrics {', '.join(unknown) or '(none selected)'}; "
            f"choose from {', '.join(METRIC_NAMES)}"
        )

    mock_mode = bool(flags.get("mock_mode"))
    if "judge" in selected and mock_mode:
        _fail("the mock backend cannot act as a judge; use a real --backend-url")

    backend: Optional[Backend] = None
    if "semsim" in selected or "judge" in selected:
        try:
            file_values = load_config_file(config_path) if config_path else None
            config = build_run_config(
                file_values, api_key=os.environ.get(API_KEY_ENV), **flags
            )
        except ConfigError as exc:
            _fail(str(exc))
        backend = make_backend(config)

    pairs = _load_pairs(pairs_path)
    try:
        scores = evaluate_pairs(pairs, backend if "semsim" in selected else None)
    except ValueError as exc:
        _fail(str(exc))
    except (BackendError, ProtocolError) as exc:
        _fail(f"backend failure during evaluation: {exc}")

    judge_scores = {}
    if "judge" in selected:
        try:
            for pair in pairs:
                judge_scores[pair["id"]] = judge(
                    pair["candidate"], pair["reference"], backend, samples=judge_samples
                )
        except ValueError as exc:
            _fail(str(exc))
        except (BackendError, ProtocolError) as exc:
            _fail(f"backend failure during judging: {exc}")

    payload = {}
    for pair_id, pair_scores in scores.items():
        record = {}
        for name in selected:
            for field_name in _METRIC_FIELDS.get(name, ()):
                record[field_name] = getattr(pair_scores, field_name)
        if pair_id in judge_scores:
            record["judge"] = asdict(judge_scores[pair_id])
        payload[pair_id] = record
    _write_json(Path(out_path), payload)
    click.echo(f"scored {len(payload)} pairs -> {out_path}")


# --- coverage ---------------------------------------------------------------


@main.command("coverage")
@click.argument("out_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("repo_path", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--report",
    "report_path",
    help="Where to write the coverage report JSON.  [default: OUT_DIR/coverage.json]",
)
def cmd_coverage(out_dir: str, repo_path: str, report_path: Optional[str]) -> None:
    """Audit whether the file summaries in OUT_DIR mention REPO_PATH's code.

    A function or variable counts as covered when its name — whole or as
    its split word phrase — appears in the owning file's summary.  Exits
    0 only if both aggregates reach 100%; an empty repository is vacuously
    fully covered.
    """
    tree = Path(out_dir)
    files_dir = tree / "files"
    if not files_dir.is_dir() and not (tree / "report.json").is_file():
        _fail(f"{out_dir} holds no pipeline output tree (expected files/ or report.json)")

    summary_texts = {}
    if files_dir.is_dir():
        for path in sorted(files_dir.glob("*.json")):
            try:
                record = json.loads(path.read_text(encoding="utf-8"))
                summary_texts[record["path"]] = record["full_text"]
            except (OSError, json.JSONDecodeError, KeyError) as exc:
                _fail(f"unreadable file summary {path}: {exc}")

    model = build_repo_model(Path(repo_path))
    per_file = {}
    for source_file, segments in model.files.items():
        rel = source_file.repo_relative_path
        entries = coverage_audit(summary_texts.get(rel, ""), segments)
        if entries:
            per_file[rel] = entries
    report = build_coverage_report(per_file)

    payload = {
        "schema_version": "1",
        "function_coverage": report.function_coverage,
        "variable_coverage": report.variable_coverage,
        "files": {
            rel: [asdict(entry) for entry in entries]
            for rel, entries in report.files.items()
        },
    }
    _write_json(Path(report_path or tree / "coverage.json"), payload)

    click.echo(
        f"functions: {report.function_coverage * 100:.1f}% "
        f"variables: {report.variable_coverage * 100:.1f}%"
    )
    if report.function_coverage < 1.0 or report.variable_coverage < 1.0:
        sys.exit(1)


if __name__ == "__main__":
    main()
