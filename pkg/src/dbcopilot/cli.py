"""Command-line interface.

Exit codes: 0 success, 1 operational error, 2 usage error (click's
default for unknown commands and bad options).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import kb as kb_mod
from .errors import CopilotError
from .evalkit import (eval_answers, eval_tool_invocation, format_answer_report,
                      format_tool_report, load_answer_cases, load_tool_cases)
from .mock_tools import MockToolServer, load_scenarios
from .safety import load_lexicon_file
from .server import AppConfig, CopilotRuntime, build_app


def _load_config(path: str | None) -> AppConfig:
    return AppConfig.from_file(path) if path else AppConfig()


@click.group()
def main() -> None:
    """Database maintenance copilot: offline RAG Q&A and anomaly diagnosis."""


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out", default="kb.jsonl", show_default=True,
              help="Manifest file to write.")
@click.option("--min-chars", default=200, show_default=True)
@click.option("--max-chars", default=800, show_default=True)
def ingest(directory: str, out: str, min_chars: int, max_chars: int) -> None:
    """Build a knowledge base from .md/.txt files in DIRECTORY."""
    try:
        cfg = kb_mod.SplitConfig(min_chars=min_chars, max_chars=max_chars)
        knowledge = kb_mod.ingest_directory(directory, cfg)
        knowledge.save_manifest(out)
    except (CopilotError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {len(knowledge)} chunks to {out}")


@main.command()
@click.argument("question")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--kb", "kb_path", type=click.Path(), default=None,
              help="kb.jsonl manifest (defaults to the bundled corpus).")
def ask(question: str, config_path: str | None, kb_path: str | None) -> None:
    """Answer QUESTION from the knowledge base, with sources."""
    cfg = _load_config(config_path)
    if kb_path:
        cfg.kb_path = kb_path
    runtime = CopilotRuntime(cfg)
    try:
        answer = runtime.qa.answer_question(question)
    except CopilotError as exc:
        raise click.ClickException(str(exc))
    finally:
        runtime.close()
    click.echo(answer.text)
    if answer.sources:
        click.echo("\nSources:")
        for source in answer.sources:
            click.echo(f"  [{source.chunk_id}] {source.source} "
                       f"(version {source.version_tag}, score {source.score:.4f})")


@main.command()
@click.argument("alert")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--scenario", default=None,
              help="Mock tool scenario (default from config, high_io).")
@click.option("--json", "as_json", is_flag=True, help="Emit the JSON trace too.")
def diagnose(alert: str, config_path: str | None, scenario: str | None,
             as_json: bool) -> None:
    """Diagnose ALERT with the multi-agent engine over the mock tools."""
    from .agents import DiagnosisEngine
    from .tools import ToolSession

    cfg = _load_config(config_path)
    if scenario:
        cfg.scenario = scenario
    runtime = CopilotRuntime(cfg)
    try:
        engine = DiagnosisEngine(alert, runtime.diagnosis_config(),
                                 session=ToolSession(session_id="cli"))
        state = engine.run_until_blocked()
        while state == "awaiting_params":
            values = {}
            for spec in engine.pending_params:
                values[spec.name] = click.prompt(
                    f"value for required parameter '{spec.name}' ({spec.type})")
            state = engine.resume(values)
    except CopilotError as exc:
        raise click.ClickException(str(exc))
    finally:
        runtime.close()
    assert engine.report is not None
    click.echo(engine.report.to_markdown())
    if as_json:
        click.echo(json.dumps(engine.report.to_dict(), indent=2))


@main.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve(port: int, host: str, config_path: str | None) -> None:
    """Run the HTTP API (and the in-process mock tool server)."""
    import uvicorn

    runtime = CopilotRuntime(_load_config(config_path))
    app = build_app(runtime)
    click.echo(f"kb_chunks={len(runtime.kb)} tools={len(runtime.registry)} "
               f"listening on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group(name="eval")
def eval_group() -> None:
    """Run the bundled evaluations."""


@eval_group.command(name="tools")
@click.argument("fixture", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def eval_tools(fixture: str, config_path: str | None) -> None:
    """Tool selection / parameter-filling accuracy over FIXTURE."""
    runtime = CopilotRuntime(_load_config(config_path))
    try:
        result = eval_tool_invocation(load_tool_cases(fixture), runtime.registry,
                                      llm=None)
    except CopilotError as exc:
        raise click.ClickException(str(exc))
    finally:
        runtime.close()
    click.echo(format_tool_report(result))


@eval_group.command(name="answers")
@click.argument("fixture", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--script", "script_path", type=click.Path(exists=True), default=None,
              help="Scripted LLM fixture for the pipeline under test.")
def eval_answers_cmd(fixture: str, config_path: str | None,
                     script_path: str | None) -> None:
    """Answer-quality distribution over FIXTURE."""
    cfg = _load_config(config_path)
    if script_path:
        cfg.llm_script = script_path
    runtime = CopilotRuntime(cfg)
    try:
        result = eval_answers(load_answer_cases(fixture), runtime.qa)
    except CopilotError as exc:
        raise click.ClickException(str(exc))
    finally:
        runtime.close()
    click.echo(format_answer_report(result))


@main.group()
def lexicon() -> None:
    """Sensitive-word lexicon utilities."""


@lexicon.command()
@click.argument("file", type=click.Path(exists=True))
def check(file: str) -> None:
    """Validate FILE (one word per line, # comments)."""
    try:
        lex = load_lexicon_file(file)
    except CopilotError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"ok: {lex.word_count} words")


@main.command(name="mock-tools")
@click.option("--scenario", default="default", show_default=True)
@click.option("--port", default=8181, show_default=True)
@click.option("--scenario-file", type=click.Path(exists=True), default=None)
def mock_tools(scenario: str, port: int, scenario_file: str | None) -> None:
    """Serve the mock diagnostic tools in the foreground."""
    scenarios = load_scenarios(scenario_file)
    if scenario not in scenarios:
        raise click.ClickException(f"unknown scenario: {scenario}")
    server = MockToolServer(scenarios, scenario, port)
    click.echo(f"mock tools on {server.base_url} (scenario {scenario})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    sys.exit(main())
