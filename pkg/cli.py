import logging
import sys
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError

from config import RuntimeConfig
from core.exceptions import ConfigFileError, InvalidParameterError, PipelineError, RetinexError
from services.pipeline_service import pipeline_service
from storage.image_store import image_store

logger = logging.getLogger(__name__)


def _configure_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, RuntimeConfig.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _solver_overrides(stages: Optional[int], gamma: Optional[float]) -> Dict[str, Any]:
    return {"solver": {"stages": stages, "gamma": gamma}}


def _fail(error: Exception) -> None:
    """Raise a ClickException carrying '<phase>: <message>'"""
    if isinstance(error, PipelineError):
        raise click.ClickException(str(error))
    if isinstance(error, (ValidationError, ConfigFileError, InvalidParameterError)):
        raise click.ClickException(f"config: {error}")
    raise click.ClickException(f"load: {error}")


@click.group()
def cli():
    """Retinex low-light image enhancement"""
    _configure_logging()


@cli.command()
@click.argument("input_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON run configuration")
@click.option("--alpha", type=click.FloatRange(0.0, 1.0), default=None, help="Fixed brightness level")
@click.option("--finetune/--no-finetune", default=None, help="Fine-tune the adjustment against a synthesized guide")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory")
@click.option("--stages", type=click.IntRange(min=1), default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--apply-gc/--no-apply-gc", default=None, help="Gamma-correct the enhanced image")
@click.option("--emit-stage-trace/--no-emit-stage-trace", default=None, help="Also save R, L, the LBS map and the stage trace")
def enhance(input_path, config_path, alpha, finetune, out_dir, stages, gamma, apply_gc, emit_stage_trace):
    """Enhance one low-light image"""
    try:
        overrides = _solver_overrides(stages, gamma)
        overrides.update({
            "finetune_enabled": finetune,
            "output_dir": out_dir,
            "apply_gc": apply_gc,
            "emit_stage_trace": emit_stage_trace,
        })
        config = pipeline_service.load_run_config(config_path, overrides)
        result = pipeline_service.cmd_enhance(input_path, config, alpha_override=alpha)
    except (RetinexError, ValidationError) as e:
        _fail(e)
    for path in result.output_paths():
        click.echo(path)


@cli.command()
@click.argument("manifest_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON run configuration")
@click.option("--apply-gc/--no-apply-gc", default=None, help="Add gamma-corrected metric columns")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Report path")
@click.option("--stages", type=click.IntRange(min=1), default=None)
@click.option("--gamma", type=float, default=None)
def benchmark(manifest_path, config_path, apply_gc, out_path, stages, gamma):
    """Evaluate every manifest entry and write a JSON report"""
    try:
        overrides = _solver_overrides(stages, gamma)
        overrides["apply_gc"] = apply_gc
        config = pipeline_service.load_run_config(config_path, overrides)
        manifest = image_store.load_manifest(manifest_path)
        report_path = pipeline_service.cmd_benchmark(manifest, config, out_path)
    except (RetinexError, ValidationError) as e:
        _fail(e)
    click.echo(report_path)


@cli.command("sweep-stages")
@click.argument("manifest_path", type=click.Path())
@click.option("--stages", "stage_list", default="1,5,9,13,17", show_default=True, help="Comma-separated stage counts")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON run configuration")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Report path")
def sweep_stages(manifest_path, stage_list, config_path, out_path):
    """Benchmark means for several stage counts"""
    try:
        stages = [int(token) for token in stage_list.split(",") if token.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {stage_list}", param_hint="--stages")
    try:
        config = pipeline_service.load_run_config(config_path)
        manifest = image_store.load_manifest(manifest_path)
        report_path = pipeline_service.cmd_stage_sweep(manifest, config, stages, out_path)
    except (RetinexError, ValidationError) as e:
        _fail(e)
    click.echo(report_path)


if __name__ == "__main__":
    cli()
