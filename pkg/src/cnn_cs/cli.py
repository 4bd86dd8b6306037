"""Command line experiment runner.

Every subcommand resolves a configuration (per-command defaults, an optional
JSON file, then flags), runs its experiment and writes ``config.json``,
``report.json`` and CSV tables into the output directory.
"""

from __future__ import annotations

import argparse
import functools
import json
import logging
from pathlib import Path
import sys
from typing import Any, Callable, Optional

import numpy as np
from pydantic import ValidationError

from . import exceptions
from .constants import LOGGER, VERSION, Command, PoolingMode, Upsampling
from .diagnostics import (
    empirical_rip,
    histogram,
    reconstruction_experiment,
    rip_2d_experiment,
    rip_ratio,
    summarize,
)
from .helpers import TrialStreams
from .model_sparse import (
    ModelSparseSignal,
    PoolingGeometry,
    sample_model_sparse,
    sample_region_sparse,
)
from .models import (
    ExperimentConfig,
    IhtReport,
    RecoveryReport,
    RecoveryTrial,
)
from .operator import (
    InputGeometry,
    StructuredOperator,
    build_operator,
    coherence,
    new_random_filterbank,
    normalize_rows,
)
from .recovery import model_iht, recover_activation
from .serialization import (
    load_filterbank,
    load_vector,
    write_histogram,
    write_json,
    write_table,
)
from .utils import merge_config

_CONV_2D = {"dims": 2, "num_filters": 512, "num_channels": 512, "filter_len": 3}

DEFAULTS: dict[Command, dict[str, Any]] = {
    Command.Rip1d: {},
    Command.Rip2d: {
        "operator": {**_CONV_2D, "length": 16},
        "sparsity": None,
        "region_fraction": 0.206,
        "pooling": {"mode": PoolingMode.Regions.value, "region": 2},
    },
    Command.Recover: {"trials": 10, "min_magnitude": 0.5},
    Command.Coherence: {"operator": {**_CONV_2D, "length": 16}, "sparsity": None},
    Command.Iht: {"iht": {"max_iters": 10}},
}


def default_config(command: Command) -> dict[str, Any]:
    """Unvalidated defaults of a subcommand."""
    return merge_config({"command": command.value}, DEFAULTS[command])


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per experiment."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--seed", type=int, help="experiment seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, dest="output", help="run directory")
    common.add_argument("--trials", type=int)
    common.add_argument("--k", type=int, dest="sparsity", help="model sparsity k")
    common.add_argument("--fraction", type=float, dest="region_fraction")
    common.add_argument("--upsampling", choices=[mode.value for mode in Upsampling])
    common.add_argument("--lambda", type=float, dest="lam", help="l1 weight")
    common.add_argument("--max-iters", type=int)
    common.add_argument("--filters", type=Path, help="MRIPFB1 filter bank file")
    common.add_argument("--input", type=Path, help="input vector for recover")
    common.add_argument("--workers", type=int)
    common.add_argument("--dump-config", action="store_true")
    common.add_argument(
        "--log-level",
        default="WARNING",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )

    parser = argparse.ArgumentParser(
        prog="cnn-cs",
        description="Compressive sensing experiments on CNN structured operators.",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    commands = parser.add_subparsers(dest="command", required=True)
    helps = {
        Command.Rip1d: "model-RIP and reconstruction error histograms (1-d)",
        Command.Rip2d: "model-RIP ratios for region-sparse 2-d activations",
        Command.Recover: "sparse hidden activation recovery",
        Command.Coherence: "coherence of a random or imported filter bank",
        Command.Iht: "residuals of model-based IHT",
    }
    for command, text in helps.items():
        commands.add_parser(command.value, parents=[common], help=text)
    return parser


def _flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {
        key: value
        for key in (
            "seed",
            "output",
            "trials",
            "sparsity",
            "region_fraction",
            "upsampling",
            "input",
            "workers",
        )
        if (value := getattr(args, key)) is not None
    }
    if args.lam is not None:
        overrides["lasso"] = {"lambda": args.lam}
    if args.max_iters is not None:
        section = "iht" if args.command == Command.Iht.value else "lasso"
        overrides = merge_config(overrides, {section: {"max_iters": args.max_iters}})
    if args.filters is not None:
        overrides["operator"] = {"filters": args.filters}
    return overrides


def _validate(data: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.parse_obj(data)
    except ValidationError as ex:
        raise exceptions.ConfigError(str(ex)) from ex


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, overlaid by the config file, overlaid by flags."""
    command = Command(args.command)
    data = default_config(command)
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as ex:
            raise exceptions.ConfigError(f"Cannot read {args.config}: {ex}") from ex
        if not isinstance(loaded, dict):
            raise exceptions.ConfigError(f"{args.config} must hold a JSON object")
        if loaded.get("command", command.value) != command.value:
            raise exceptions.ConfigError(
                f"{args.config} is for {loaded['command']}, not {command.value}"
            )
        data = merge_config(data, loaded)
    config = _validate(merge_config(data, _flag_overrides(args)))

    if config.operator.filters is not None:
        try:
            bank = load_filterbank(config.operator.filters)
        except (OSError, exceptions.FilterBankFormatError) as ex:
            raise exceptions.ConfigError(str(ex)) from ex
        shape = {
            "dims": bank.dims,
            "num_filters": bank.num_filters,
            "num_channels": bank.num_channels,
            "filter_len": bank.filter_len,
        }
        config = _validate(merge_config(config.dict(by_alias=True), {"operator": shape}))
    return config


def operator_from_config(config: ExperimentConfig) -> StructuredOperator:
    """Imported or seeded random filter bank on the configured input geometry."""
    settings = config.operator
    if settings.filters is not None:
        bank = load_filterbank(settings.filters)
    else:
        if config.seed is None:
            raise exceptions.ConfigError("A seed or --filters is required")
        bank = new_random_filterbank(
            settings.num_filters,
            settings.num_channels,
            settings.filter_len,
            settings.dims,
            seed=config.seed,
        )
    if settings.normalize:
        bank = normalize_rows(bank)
    return build_operator(
        bank, InputGeometry(settings.length, settings.stride, settings.dims)
    )


def _run_dir(config: ExperimentConfig) -> Path:
    config.output.mkdir(parents=True, exist_ok=True)
    write_json(config.output / "config.json", config)
    return config.output


def _exit_code(
    runner: Callable[[ExperimentConfig], None]
) -> Callable[[ExperimentConfig], int]:
    """Map package errors onto exit codes; messages go to standard error."""

    @functools.wraps(runner)
    def wrapper(config: ExperimentConfig) -> int:
        LOGGER.info("Running %s", config.command.value)
        try:
            runner(config)
        except exceptions.ConfigError as ex:
            sys.stderr.write(f"cnn-cs: configuration error: {ex}\n")
            return 2
        except (exceptions.CnnCsError, ValueError, OSError) as ex:
            sys.stderr.write(f"cnn-cs: {type(ex).__name__}: {ex}\n")
            return 1
        LOGGER.info("Wrote results to %s", config.output)
        return 0

    return wrapper


@_exit_code
def run_rip_1d(config: ExperimentConfig) -> None:
    """Model-RIP ratios, WWᵀ ratios and feedforward reconstruction errors."""
    op = operator_from_config(config)
    geom = PoolingGeometry.for_operator(op, config.pooling)
    bins = config.histogram
    span = (bins.low, bins.high)

    report = empirical_rip(op, config.sparsity, config.trials, config.seed, config.workers)
    recon = reconstruction_experiment(
        op,
        config.sparsity,
        geom,
        config.upsampling,
        config.trials,
        config.seed,
        bins,
        config.workers,
    )
    gram_mean, gram_stddev, _, _ = summarize(recon.gram_ratios)
    report.params.update(
        upsampling=config.upsampling.value,
        gram_ratio_mean=gram_mean,
        gram_ratio_stddev=gram_stddev,
        error_median=float(np.median(recon.errors)),
        error_max=max(recon.errors),
        error_underflow=recon.histogram.underflow,
        error_overflow=recon.histogram.overflow,
    )

    out = _run_dir(config)
    write_json(out / "report.json", report)
    write_histogram(out / "rip_ratios.csv", histogram(report.ratios, bins.bins, span))
    write_histogram(out / "gram_ratios.csv", histogram(recon.gram_ratios, bins.bins, span))
    write_histogram(out / "errors.csv", recon.histogram)


@_exit_code
def run_rip_2d(config: ExperimentConfig) -> None:
    """Model-RIP ratios of region-sparse 2-d activations."""
    op = operator_from_config(config)
    geom = PoolingGeometry.for_operator(op, config.pooling)
    bins = config.histogram

    report = rip_2d_experiment(
        op, geom, config.region_fraction, config.trials, config.seed, workers=config.workers
    )
    out = _run_dir(config)
    write_json(out / "report.json", report)
    write_histogram(
        out / "rip_ratios.csv", histogram(report.ratios, bins.bins, (bins.low, bins.high))
    )


def _planted(config: ExperimentConfig, geom: PoolingGeometry, rng) -> ModelSparseSignal:
    if geom.mode == PoolingMode.Regions:
        return sample_region_sparse(
            geom,
            config.region_fraction or 1.0,
            rng,
            min_magnitude=config.min_magnitude,
        )
    return sample_model_sparse(
        geom.num_blocks,
        geom.shifts,
        config.sparsity,
        rng,
        dims=geom.dims,
        min_magnitude=config.min_magnitude,
    )


def _support_scores(
    recovered: ModelSparseSignal, planted: ModelSparseSignal
) -> tuple[Optional[float], float]:
    found, truth = set(recovered.support), set(planted.support)
    hits = len(found & truth)
    precision = hits / len(found) if found else None
    recall = hits / len(truth) if truth else 1.0
    return precision, recall


@_exit_code
def run_recover(config: ExperimentConfig) -> None:
    """Sparse hidden activation recovery from planted or loaded inputs."""
    op = operator_from_config(config)
    geom = PoolingGeometry.for_operator(op, config.pooling)

    instances: list[tuple[int, np.ndarray, Optional[ModelSparseSignal]]] = []
    if config.input is not None:
        x = load_vector(config.input)
        if x.shape != (op.col_count,):
            raise exceptions.ConfigError(
                f"{config.input} holds {x.size} values, operator expects {op.col_count}"
            )
        instances.append((0, x, None))
    else:
        for trial, rng in TrialStreams(config.seed, config.trials):
            planted = _planted(config, geom, rng)
            instances.append((trial, op.apply_adjoint(planted.coeffs), planted))

    trials, rows = [], []
    for trial, x, planted in instances:
        recovered = recover_activation(op, x, config.lasso, geom)
        precision, recall = (None, None)
        if planted is not None:
            precision, recall = _support_scores(recovered, planted)
        trials.append(
            RecoveryTrial(
                trial=trial,
                support=list(recovered.support),
                ratio=rip_ratio(op, recovered.coeffs),
                precision=precision,
                recall=recall,
            )
        )
        rows.extend(
            (trial, block, position, recovered.coeffs[block * geom.block_size + position])
            for block, position in recovered.support
        )

    precisions = [t.precision for t in trials if t.precision is not None]
    recalls = [t.recall for t in trials if t.recall is not None]
    report = RecoveryReport(
        trials=trials,
        mean_precision=float(np.mean(precisions)) if precisions else None,
        mean_recall=float(np.mean(recalls)) if recalls else None,
        params={
            "seed": config.seed,
            "pooling": config.pooling.mode.value,
            "lambda": config.lasso.lam,
            "lambda_scale": config.lasso.lambda_scale,
        },
    )
    out = _run_dir(config)
    write_json(out / "report.json", report)
    write_table(out / "support.csv", ("trial", "block", "position", "value"), rows)


@_exit_code
def run_coherence(config: ExperimentConfig) -> None:
    """Coherence of the configured filter bank."""
    op = operator_from_config(config)
    report = coherence(op)
    report.params.update(
        dims=op.dims,
        num_filters=op.num_blocks,
        num_channels=op.bank.num_channels,
        filter_len=op.bank.filter_len,
        length=op.geom.length,
        seed=config.seed,
        filters=str(config.operator.filters) if config.operator.filters else None,
    )
    out = _run_dir(config)
    write_json(out / "report.json", report)
    sys.stdout.write(f"mu={report.mu:.6f}\n")


@_exit_code
def run_iht(config: ExperimentConfig) -> None:
    """Relative residual of model-based IHT per iteration."""
    op = operator_from_config(config)
    geom = PoolingGeometry.for_operator(op, config.pooling)
    settings = config.iht.copy(
        update={
            "sparsity": config.sparsity,
            "pooling": config.pooling,
            "upsampling": config.upsampling,
        }
    )

    histories, iterations, rows = [], [], []
    for trial, rng in TrialStreams(config.seed, config.trials):
        z = sample_model_sparse(
            op.num_blocks, op.shifts, config.sparsity, rng, dims=op.dims
        ).coeffs
        result = model_iht(op, op.apply_adjoint(z), settings, geom)
        iterations.append(result.iterations)
        history = result.residual_history
        rows.extend((trial, step, value) for step, value in enumerate(history, 1))
        histories.append(history + [history[-1]] * (settings.max_iters - len(history)))

    medians = np.median(np.array(histories), axis=0).tolist()
    report = IhtReport(
        median_residuals=medians,
        iterations=iterations,
        improved_fraction=float(np.mean([h[-1] <= h[0] for h in histories])),
        params={
            "seed": config.seed,
            "k": config.sparsity,
            "max_iters": settings.max_iters,
            "residual_tol": settings.residual_tol,
            "upsampling": settings.upsampling.value,
        },
    )
    out = _run_dir(config)
    write_json(out / "report.json", report)
    write_table(
        out / "residual_history.csv",
        ("iter", "relative_residual"),
        enumerate(medians, 1),
    )
    write_table(
        out / "residual_trials.csv", ("trial", "iter", "relative_residual"), rows
    )


RUNNERS: dict[Command, Callable[[ExperimentConfig], int]] = {
    Command.Rip1d: run_rip_1d,
    Command.Rip2d: run_rip_2d,
    Command.Recover: run_recover,
    Command.Coherence: run_coherence,
    Command.Iht: run_iht,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point of the ``cnn-cs`` console script."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level)

    try:
        config = resolve_config(args)
    except exceptions.ConfigError as ex:
        sys.stderr.write(f"cnn-cs: configuration error: {ex}\n")
        return 2

    if args.dump_config:
        sys.stdout.write(config.json(by_alias=True, indent=2) + "\n")
        return 0
    return RUNNERS[config.command](config)


if __name__ == "__main__":
    sys.exit(main())
