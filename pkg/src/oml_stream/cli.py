#!/usr/bin/env python3
"""
oml-stream CLI - Command line interface.
"""

import functools
import logging
from collections.abc import Callable
from pathlib import Path
from typing import Any, NoReturn, TypeVar

import click
import pandas as pd
from click.core import ParameterSource

from oml_stream import __version__
from oml_stream.config import ENV_PREFIX, build_config
from oml_stream.core.data_io import (
    StreamDataset,
    dataset_stats,
    generate_synthetic,
    load_dataset,
    write_dense_csv,
    write_sparse_multilabel,
)
from oml_stream.exceptions import (
    ConfigError,
    OmlStreamError,
    exit_code_for,
    handle_exception,
)
from oml_stream.models.schemas import SYNTH_PRESETS, Method, SynthConfig, synth_preset

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])

METHOD_CHOICES = {"oml": Method.OML, "knn": Method.KNN_EUCLIDEAN}
LOG_LEVELS = ["debug", "info", "warning", "error"]


def _fail(error: OmlStreamError) -> NoReturn:
    click.echo(f"❌ {error.message}", err=True)
    raise click.exceptions.Exit(exit_code_for(error))


def handle_errors(func: F) -> F:
    """Report oml-stream errors as ``❌`` lines with the mapped exit code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except OmlStreamError as e:
            _fail(e)
        except Exception as e:
            try:
                handle_exception(e, context=func.__name__)
            except OmlStreamError as converted:
                _fail(converted)

    return wrapper  # type: ignore[return-value]


@click.group()
@click.version_option(__version__, prog_name="oml-stream")
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="info",
    envvar=f"{ENV_PREFIX}log_level",
    help="Log level",
)
@click.pass_context
def cli(ctx: click.Context, log_level: str) -> None:
    """oml-stream - streaming multi-label online metric learning with kNN prediction."""
    ctx.ensure_object(dict)
    ctx.obj["log_level_flag"] = (
        ctx.get_parameter_source("log_level") == ParameterSource.COMMANDLINE
    )
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger().setLevel(getattr(logging, log_level.upper()))


def _apply_config_log_level(level: str) -> None:
    """A config-file or env log level applies unless --log-level was given."""
    ctx = click.get_current_context(silent=True)
    obj = ctx.find_root().obj if ctx is not None else None
    if isinstance(obj, dict) and obj.get("log_level_flag"):
        return
    logging.getLogger().setLevel(getattr(logging, level.upper()))


def _synth_dataset(preset: str | None, rng_seed: int) -> StreamDataset:
    name = preset or "desk"
    cfg = synth_preset(name, rng_seed=rng_seed)
    return generate_synthetic(cfg, name=name)


@cli.command()
@click.option("--data", type=click.Path(dir_okay=False), help="Dataset file (sparse or .csv)")
@click.option(
    "--format",
    "data_format",
    type=click.Choice(["sparse", "csv"]),
    help="Dataset format (default: by extension)",
)
@click.option("--q", "csv_q", type=int, help="Label count, required for CSV datasets")
@click.option("--synth", is_flag=True, help="Run on a generated stream instead of --data")
@click.option(
    "--preset",
    type=click.Choice(sorted(SYNTH_PRESETS)),
    help="Synthetic preset (implies --synth, default desk)",
)
@click.option(
    "--method",
    "methods",
    type=click.Choice(sorted(METHOD_CHOICES)),
    multiple=True,
    help="Method to evaluate; repeat for several (default oml)",
)
@click.option("--d", type=int, help="Embedding dimension (default floor(0.8 q))")
@click.option("--k", type=int, help="Neighbors used for prediction")
@click.option("--m", type=float, help="Lower clamp for the step size")
@click.option("--M", "M", type=float, help="Upper clamp for the step size")
@click.option("--seed-fraction", type=float, help="Fraction of data used as initial memory")
@click.option("--ridge", type=float, help="Ridge used to fit P (default auto)")
@click.option(
    "--update-rule", type=click.Choice(["exact", "first_order", "first-order"])
)
@click.option("--train-nn", type=click.Choice(["raw", "learned"]))
@click.option("--threshold", type=float, help="Vote fraction to predict a label")
@click.option("--checkpoint-every", type=int, help="Rounds between curve rows")
@click.option("--seed", "rng_seed", type=int, help="Random seed")
@click.option("--max-store-size", type=int, help="FIFO cap on the neighbor store")
@click.option("--no-shuffle", is_flag=True, help="Keep file order for the seed split")
@click.option("--config", "config_file", type=click.Path(dir_okay=False), help="key=value config file")
@click.option("--out", default="results", show_default=True, help="Output directory")
@handle_errors
def run(
    data: str | None,
    data_format: str | None,
    csv_q: int | None,
    synth: bool,
    preset: str | None,
    methods: tuple[str, ...],
    d: int | None,
    k: int | None,
    m: float | None,
    M: float | None,
    seed_fraction: float | None,
    ridge: float | None,
    update_rule: str | None,
    train_nn: str | None,
    threshold: float | None,
    checkpoint_every: int | None,
    rng_seed: int | None,
    max_store_size: int | None,
    no_shuffle: bool,
    config_file: str | None,
    out: str,
) -> None:
    """Prequential run of one or more methods; writes curve, summary and model."""
    from oml_stream.core.evaluation import (
        PrequentialRunner,
        write_curve_csv,
        write_summary,
    )
    from oml_stream.utils.snapshot import save_snapshot

    config = build_config(
        config_file,
        d=d,
        k=k,
        m=m,
        M=M,
        seed_fraction=seed_fraction,
        ridge=ridge,
        update_rule=update_rule,
        train_nn_metric=train_nn,
        threshold=threshold,
        checkpoint_every=checkpoint_every,
        rng_seed=rng_seed,
        max_store_size=max_store_size,
        shuffle=False if no_shuffle else None,
    )
    _apply_config_log_level(config.log_level)
    hp = config.to_hyperparams()

    synth = synth or preset is not None
    if synth == (data is not None):
        raise ConfigError("give exactly one of --data or --synth/--preset")
    if data is not None:
        ds = load_dataset(data, fmt=data_format, q=csv_q)
    else:
        ds = _synth_dataset(preset, config.rng_seed)
    click.echo(f"📂 {ds.name}: n={ds.n}, p={ds.p}, q={ds.q}")

    selected = [METHOD_CHOICES[name] for name in dict.fromkeys(methods or ("oml",))]
    runners = []
    for method in selected:
        click.echo(f"🔧 Running {method.value} ...")
        runner = PrequentialRunner(
            ds, hp, method, config.checkpoint_every, config.shuffle
        )
        curve, _ = runner.run()
        runners.append((runner, curve))

    # nothing is written until every run has finished
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for runner, curve in runners:
        stem = out_dir / f"{ds.name}_{runner.method.value}"
        summary = runner.summary()
        write_curve_csv(curve, f"{stem}_curve.csv")
        write_summary(summary, f"{stem}_summary.json")
        save_snapshot(f"{stem}_model.npz", hp, state=runner.state, store=runner.store)
        metrics = summary.metrics
        click.echo(
            f"✅ {runner.method.value}: macro-F1 {metrics.macro_f1:.4f}, "
            f"micro-F1 {metrics.micro_f1:.4f}, example-F1 {metrics.example_f1:.4f}, "
            f"hamming {metrics.hamming_loss:.4f}"
        )
        if summary.singular_fallbacks:
            click.echo(f"⚠️  {summary.singular_fallbacks} singular updates fell back to first order")
    click.echo(f"📁 Outputs in {out_dir}")


@cli.command()
@click.option("--preset", type=click.Choice(sorted(SYNTH_PRESETS)), help="Start from a preset")
@click.option("--n", type=int, help="Number of examples")
@click.option("--p", type=int, help="Feature count")
@click.option("--q", type=int, help="Label count")
@click.option("--latent-dim", type=int, help="Latent dimension")
@click.option("--noise-std", type=float, help="Feature noise std")
@click.option("--label-threshold", type=float, help="Latent score above which a label is on")
@click.option("--seed", "rng_seed", type=int, help="Generator seed")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output file")
@handle_errors
def synth(
    preset: str | None,
    n: int | None,
    p: int | None,
    q: int | None,
    latent_dim: int | None,
    noise_std: float | None,
    label_threshold: float | None,
    rng_seed: int | None,
    out: str,
) -> None:
    """Generate a label-correlated synthetic stream in the sparse format."""
    overrides = {
        "n": n,
        "p": p,
        "q": q,
        "latent_dim": latent_dim,
        "noise_std": noise_std,
        "label_threshold": label_threshold,
        "rng_seed": rng_seed,
    }
    if preset:
        cfg = synth_preset(preset, **overrides)
    else:
        cfg = SynthConfig(**{key: v for key, v in overrides.items() if v is not None})
    ds = generate_synthetic(cfg, name=Path(out).stem)

    with open(out, "w", encoding="utf-8", newline="") as f:
        write_sparse_multilabel(ds, f)

    stats = dataset_stats(ds)
    click.echo(f"✅ Wrote {stats.n} examples (p={stats.p}, q={stats.q}) to {out}")
    click.echo(
        f"   label cardinality {stats.cardinality:.3f}, "
        f"density {stats.density:.3f}, {stats.distinct_labelsets} distinct label sets"
    )


@cli.command()
@click.argument("source", type=click.Path(dir_okay=False))
@click.argument("target", type=click.Path(dir_okay=False))
@click.option("--to", "target_format", required=True, type=click.Choice(["csv", "sparse"]))
@click.option(
    "--from",
    "source_format",
    type=click.Choice(["csv", "sparse"]),
    help="Source format (default: by extension)",
)
@click.option("--q", "csv_q", type=int, help="Label count, required when reading CSV")
@handle_errors
def convert(
    source: str,
    target: str,
    target_format: str,
    source_format: str | None,
    csv_q: int | None,
) -> None:
    """Convert between the dense CSV and sparse multi-label formats."""
    ds = load_dataset(source, fmt=source_format, q=csv_q)
    if Path(source).resolve() == Path(target).resolve():
        raise ConfigError("refusing to overwrite the input file")

    with open(target, "w", encoding="utf-8", newline="") as f:
        if target_format == "csv":
            write_dense_csv(ds, f)
        else:
            write_sparse_multilabel(ds, f)
    click.echo(f"✅ Converted {ds.n} examples: {source} -> {target} ({target_format})")


def _curve_names(paths: tuple[str, ...]) -> list[str]:
    names: list[str] = []
    for path in paths:
        name = Path(path).stem
        if name.endswith("_curve"):
            name = name[: -len("_curve")]
        candidate, i = name, 2
        while candidate in names:
            candidate = f"{name}_{i}"
            i += 1
        names.append(candidate)
    return names


@cli.command()
@click.argument("curves", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--out", default="report", show_default=True, help="Directory for SVG charts")
@handle_errors
def report(curves: tuple[str, ...], out: str) -> None:
    """Final-metrics table and one SVG chart per metric for curve CSV files."""
    from oml_stream.core.evaluation import read_curve_csv
    from oml_stream.utils.charts import final_metrics_table, render_report_charts

    frames = {
        name: read_curve_csv(path)
        for name, path in zip(_curve_names(curves), curves, strict=True)
    }
    table = final_metrics_table(frames)
    with pd.option_context("display.width", 120):
        click.echo(table.to_string(float_format=lambda v: f"{v:.4f}"))

    written = render_report_charts(frames, out)
    click.echo(f"📊 Wrote {len(written)} charts to {out}")


@cli.command()
@click.option(
    "--n",
    "ns",
    type=int,
    multiple=True,
    help="Store size; repeat for several (default 1000 2000 4000 8000)",
)
@click.option("--p", default=20, show_default=True, help="Feature count")
@click.option("--q", default=8, show_default=True, help="Label count")
@click.option("--d", default=4, show_default=True, help="Embedding dimension")
@click.option("--rounds", default=200, show_default=True, help="Timed rounds per store size")
@click.option("--seed", "rng_seed", default=0, show_default=True, help="Random seed")
@handle_errors
def bench(ns: tuple[int, ...], p: int, q: int, d: int, rounds: int, rng_seed: int) -> None:
    """Time training rounds and test queries against memory size."""
    from oml_stream.core.benchmark import scaling_benchmark

    result = scaling_benchmark(
        ns or (1000, 2000, 4000, 8000), p=p, q=q, d=d, rounds=rounds, rng_seed=rng_seed
    )
    click.echo(f"{'n':>8}  {'train (us)':>12}  {'test (us)':>12}")
    for point in result.points:
        click.echo(
            f"{point.n:>8}  {point.train_seconds * 1e6:>12.1f}  {point.test_seconds * 1e6:>12.1f}"
        )
    click.echo(
        f"📈 Training time vs n: slope {result.slope * 1e9:.3f} ns/example, "
        f"R² {result.r_squared:.3f}"
    )


# Configuration management commands
@cli.group()
def config() -> None:
    """Configuration management commands."""
    pass


@config.command()
@click.option(
    "--file", "-f", default="config/oml_stream.conf", help="Configuration file path"
)
def create_default(file: str) -> None:
    """Create a default configuration file."""
    from oml_stream.utils.config_utils import create_default_config_file

    try:
        create_default_config_file(file)
        click.echo(f"✅ Default configuration created: {file}")
    except OSError as e:
        click.echo(f"❌ Failed to create configuration: {e}", err=True)
        raise click.ClickException(str(e))


@config.command()
@click.argument("file")
def validate(file: str) -> None:
    """Validate a configuration file."""
    from oml_stream.utils.config_utils import validate_config_file

    result = validate_config_file(file)

    if result["valid"]:
        click.echo(f"✅ Configuration file is valid: {file}")

        if result["warnings"]:
            click.echo("⚠️  Warnings:")
            for warning in result["warnings"]:
                click.echo(f"   {warning}")
    else:
        click.echo(f"❌ Configuration file is invalid: {file}", err=True)
        for error in result["errors"]:
            click.echo(f"   {error}", err=True)
        raise click.exceptions.Exit(2)


if __name__ == "__main__":
    cli()
