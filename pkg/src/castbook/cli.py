"""Command-line surface.

Commands:
  castbook personas STORY --config CONFIG     persona stage only
  castbook script STORY --config CONFIG       personas + script
  castbook generate STORY --config CONFIG     full audiobook run
  castbook evaluate PATH... [--mllm]          metric reports + table
  castbook compare REPORT.json...             rank stored reports

Exit codes: 0 success, 1 pipeline abort, 2 configuration/environment
error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .audio import read_wav, resample_pcm
from .backends.base import BackendError
from .config import ConfigError, EngineConfig, build_backends, load_config
from .evaluation.judge import mllm_evaluate
from .evaluation.metrics import EvalReport, evaluate_audio
from .evaluation.report import compare_report, render_table
from .model import ModelError, SAMPLE_RATE
from .pipeline import PipelineError, run_generate
from .segmentation import load_story

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_CONFIG = 2


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_inputs(story_path: str, config_path: str, story_id: str | None, seed: int | None):
    try:
        config = load_config(config_path)
        if seed is not None:
            config = _override_seed(config, seed)
        backends = build_backends(config)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    try:
        story = load_story(story_path, story_id=story_id or Path(story_path).stem)
    except ModelError as exc:
        _fail(EXIT_CONFIG, str(exc))
    return story, config, backends


def _override_seed(config: EngineConfig, seed: int) -> EngineConfig:
    data = config.as_dict()
    data["seed"] = seed
    from .config import parse_config

    return parse_config(data, config_dir=config.config_dir)


def _out_dir(out: str | None, story_id: str) -> Path:
    return Path(out) if out else Path("out") / story_id


def _run(story_path, config_path, story_id, seed, out, force, stage) -> None:
    story, config, backends = _load_inputs(story_path, config_path, story_id, seed)
    out_dir = _out_dir(out, story.id)
    try:
        result = run_generate(story, config, backends, out_dir, force=force, stage=stage)
    except (PipelineError, BackendError) as exc:
        _fail(EXIT_PIPELINE, str(exc))
    for hit in result.cache_hits:
        click.echo(f"cache hit: {hit}")
    click.echo(f"output: {result.out_dir}")
    if result.manifest.status == "complete":
        click.echo(
            f"audiobook: {len(result.manifest.segments)} segments, "
            f"{result.manifest.total_duration_s:.2f}s total"
        )


_shared_options = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--out", default=None, help="Output directory (default: out/<story_id>)."),
    click.option("--story-id", default=None, help="Story id (default: file stem)."),
    click.option("--seed", default=None, type=int, help="Override the config seed."),
    click.option("--force", is_flag=True, help="Ignore cached stages and regenerate."),
]


def _with_shared_options(fn):
    for option in reversed(_shared_options):
        fn = option(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="castbook")
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Multi-speaker audiobook engine."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.argument("story", type=click.Path(exists=True, dir_okay=False))
@_with_shared_options
def personas(story, config_path, out, story_id, seed, force) -> None:
    """Generate the persona store for a story."""
    _run(story, config_path, story_id, seed, out, force, stage="personas")


@main.command()
@click.argument("story", type=click.Path(exists=True, dir_okay=False))
@_with_shared_options
def script(story, config_path, out, story_id, seed, force) -> None:
    """Generate personas and the per-sentence script."""
    _run(story, config_path, story_id, seed, out, force, stage="script")


@main.command()
@click.argument("story", type=click.Path(exists=True, dir_okay=False))
@_with_shared_options
@click.option(
    "--stage",
    type=click.Choice(["personas", "script", "full"]),
    default="full",
    help="Stop after the named stage.",
)
def generate(story, config_path, out, story_id, seed, force, stage) -> None:
    """Produce a complete audiobook run directory."""
    _run(story, config_path, story_id, seed, out, force, stage=stage)


def _read_eval_input(path: Path) -> tuple[str, bytes]:
    """Accept a WAV file or a run directory containing audiobook.wav."""
    if path.is_dir():
        wav_path = path / "audiobook.wav"
        if not wav_path.is_file():
            raise ConfigError(f"{path} has no audiobook.wav")
        name = path.name
    else:
        wav_path = path
        name = path.stem
    pcm, rate = read_wav(wav_path)
    return name, resample_pcm(pcm, rate, SAMPLE_RATE)


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Directory for report JSON files.")
@click.option("--mllm", is_flag=True, help="Also run the MLLM judge (needs a judge backend).")
def evaluate(paths, config_path, out, mllm) -> None:
    """Compute metrics for audiobooks (WAV files or run directories)."""
    try:
        config = load_config(config_path) if config_path else EngineConfig()
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    judge = None
    if mllm:
        if config.judge.kind == "none":
            _fail(EXIT_CONFIG, "--mllm requires backends.judge in the config")
        try:
            judge = build_backends(config).judge
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))

    reports: dict[str, EvalReport] = {}
    out_dir = Path(out) if out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for raw in paths:
        path = Path(raw)
        try:
            name, pcm = _read_eval_input(path)
        except (ConfigError, Exception) as exc:
            _fail(EXIT_PIPELINE, f"cannot read {path}: {exc}")
        try:
            report = evaluate_audio(
                pcm,
                window_s=config.eval.window_s,
                frame_hop_s=config.eval.frame_hop_s,
                f_min_hz=config.eval.f_min_hz,
                f_max_hz=config.eval.f_max_hz,
            )
        except Exception as exc:
            _fail(EXIT_PIPELINE, f"evaluation failed for {path}: {exc}")
        if judge is not None:
            scores = mllm_evaluate(
                pcm, judge, questions=config.eval.questions, chunk_s=config.eval.judge_chunk_s
            )
            report = EvalReport(
                speaker_similarity=report.speaker_similarity,
                turning_points=report.turning_points,
                per_window=report.per_window,
                parameters=report.parameters,
                mllm_scores=scores,
            )
        reports[name] = report
        target = (out_dir or (path if path.is_dir() else path.parent)) / f"report-{name}.json"
        target.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        similarity = (
            "n/a" if report.speaker_similarity is None else f"{report.speaker_similarity:.3f}"
        )
        click.echo(f"{name}: similarity {similarity}, turning points {report.turning_points}")
        if report.mllm_scores:
            scores_text = ", ".join(f"{k} {v:.1f}" for k, v in sorted(report.mllm_scores.items()))
            click.echo(f"{name}: MLLM {scores_text}")
    if len(reports) > 1:
        click.echo("")
        click.echo(render_table(compare_report(reports)))


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit machine-readable JSON.")
def compare(reports, as_json) -> None:
    """Rank stored report JSON files (best / second-best per metric)."""
    loaded: dict[str, EvalReport] = {}
    for raw in reports:
        path = Path(raw)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            name = data.get("system", path.stem.removeprefix("report-"))
            loaded[name] = EvalReport.from_dict(data)
        except Exception as exc:
            _fail(EXIT_CONFIG, f"cannot load report {path}: {exc}")
    comparison = compare_report(loaded)
    if as_json:
        click.echo(json.dumps(comparison, indent=2))
    else:
        click.echo(render_table(comparison))


if __name__ == "__main__":
    main()
