"""Command-line interface for the summarization pipeline.

Exit codes: 0 success, 2 configuration error, 3 missing stage dependency,
4 remote service failure, 1 anything else.
"""

from __future__ import annotations

import sys

import click

from .pipeline import (
    STAGES,
    ConfigError,
    DependencyError,
    Pipeline,
    PipelineConfig,
    PipelineError,
    RemoteServiceError,
)

EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_REMOTE = 4


def _run(config_path: str, stages, force: bool, parallelism: int | None, strict_neus: bool) -> None:
    try:
        config = PipelineConfig.load(config_path)
        if parallelism is not None:
            config.parallelism = parallelism
        if strict_neus:
            config.strict_neus = True
        Pipeline(config, force=force, log=click.echo).run(stages)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DependencyError as exc:
        click.echo(f"dependency error: {exc}", err=True)
        sys.exit(EXIT_DEPENDENCY)
    except RemoteServiceError as exc:
        click.echo(f"remote service error: {exc}", err=True)
        sys.exit(EXIT_REMOTE)
    except PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _stage_options(fn):
    fn = click.option("--config", "config_path", required=True, type=click.Path(), help="Pipeline config JSON.")(fn)
    fn = click.option("--force", is_flag=True, help="Recompute even when stage artifacts exist.")(fn)
    fn = click.option("--parallelism", type=int, default=None, help="Worker pool size for cluster processing.")(fn)
    fn = click.option("--strict-neus", is_flag=True, help="Require exactly one left/center/right article per cluster.")(fn)
    return fn


@click.group()
def main():
    """Build event relation graphs from news clusters, prompt an LLM for a
    neutralized summary, and score the results."""


@main.command()
@_stage_options
@click.option(
    "--stages",
    default=None,
    help=f"Comma-separated subset of: {', '.join(STAGES)}. Default: all.",
)
def run(config_path, force, parallelism, strict_neus, stages):
    """Run the pipeline end to end (or a stage subset)."""
    selected = [s.strip() for s in stages.split(",")] if stages else None
    _run(config_path, selected, force, parallelism, strict_neus)


def _single_stage(stage_name: str, help_text: str):
    @main.command(name=stage_name, help=help_text)
    @_stage_options
    def _cmd(config_path, force, parallelism, strict_neus):
        _run(config_path, [stage_name], force, parallelism, strict_neus)

    return _cmd


_single_stage("ingest", "Validate prediction files (or query the model service) per cluster.")
_single_stage("build", "Decode predictions into event relation graph JSON.")
_single_stage("textualize", "Write graph tables and rendered prompts.")
_single_stage("encode", "Train the toy soft prompt per graph; write checkpoint and loss trace.")
_single_stage("summarize", "Request summaries from the configured LLM endpoint.")
_single_stage("evaluate", "Score summaries against references (content and bias metrics).")
_single_stage("report", "Aggregate evaluation records into report.json and report.md.")


if __name__ == "__main__":
    main()
