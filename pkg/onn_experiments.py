"""
Script to run optical neural network experiments on the simulated optical matrix-vector multiplier.

Every subcommand reads a key = value experiment file (or an emitted manifest.json), writes its results into an
output directory, and exits with 0 on success, 2 on configuration errors, 3 on I/O or dataset errors and 4 when
training diverges or the simulated device fails (a degenerate recalibration, an ambiguous optical error sign).

This script performs the following steps:
1. Initialize logging and load the experiment configuration.
2. Load the MNIST files and build the seeded split (train and sweep).
3. Run the characterization, the training run, or the noise sweep.
4. Save the manifest, metrics, confusion matrix and checkpoint CSV/text files to the output directory.
"""

import os
from dataclasses import replace
from datetime import datetime

import click
import numpy as np
import pandas as pd

from utils import __version__
from utils.dataset_utils import NUM_CLASSES, DatasetException, load_mnist, make_split
from utils.file_utils import (
    CheckpointException,
    ConfigException,
    ExperimentManifest,
    create_directories,
    file_checksum,
    load_config,
    resolve_dataset_paths,
    save_checkpoint,
    save_dataframe_to_csv,
    write_manifest_json,
)
from utils.logging_config import finalize_logger, setup_logger
from utils.network_utils import get_architecture
from utils.optics_utils import NoiseSpec, OpticalDevice, OpticsException, run_characterization
from utils.trainer_utils import (
    NonFiniteLossException,
    derive_seeds,
    in_silico_protocol,
    noise_sweep,
    train,
    train_with_optical_error,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _load_manifest(config_path, seed):
    """Load the experiment file (all defaults without one) and apply a --seed override."""
    manifest = ExperimentManifest() if config_path is None else load_config(config_path)
    if seed is not None:
        try:
            manifest.training = replace(manifest.training, master_seed=seed)
        except ValueError as error:
            raise ConfigException(str(error)) from error
    return manifest


def _load_split(manifest, logger):
    """Load the four MNIST files, record their checksums in the manifest and build the split."""
    paths = resolve_dataset_paths(manifest.dataset)
    manifest.dataset_checksums = {key: file_checksum(path) for key, path in paths.items()}
    images, labels = load_mnist(paths, logger)
    split = make_split(images, manifest.dataset.split_seed, labels)
    logger.info(
        f"Split {len(split.train)}/{len(split.validation)}/{len(split.test)} "
        f"with seed {manifest.dataset.split_seed}"
    )
    return split


def _build_device(manifest, arch, seeds):
    """A device shaped for the optical layer, with the configured noise channel and the probe stream."""
    noise_seed = manifest.noise.seed if manifest.noise.seed is not None else seeds["noise"]
    noise = NoiseSpec.build(
        manifest.noise.kind, manifest.noise.sigma, arch.optical_shape, noise_seed, arch.is_complex
    )
    return OpticalDevice(
        manifest.device,
        arch.optical_shape,
        noise=noise,
        complex_weights=arch.is_complex,
        probe_seed=seeds["probes"],
    )


def _confusion_frame(confusion):
    """The 10x10 count matrix; row i holds the test samples of true class i."""
    return pd.DataFrame(
        confusion, columns=[f"predicted_{label}" for label in range(NUM_CLASSES)]
    )


def _percent(value):
    return f"{100 * value:.1f}%"


def _run(ctx, command, config_path, out, seed, body):
    """
    Run one subcommand body with logging, the manifest and the exit-code contract.

    Args:
        ctx (click.Context): Click context holding the log level.
        command (str): Subcommand name, used for the log file.
        config_path (str): Experiment file, or None for all defaults.
        out (str): Output directory.
        seed (int): Optional master seed override.
        body (callable): body(manifest, out, logger) doing the work.
    """
    logger = setup_logger(
        f"onn_{command}_logger", f"onn_{command}.log", log_level=ctx.obj["log_level"]
    )
    exit_code = EXIT_OK
    try:
        manifest = _load_manifest(config_path, seed)
        create_directories(logger, out)
        manifest.started_at = datetime.now().isoformat(timespec="seconds")
        body(manifest, out, logger)
        manifest.finished_at = datetime.now().isoformat(timespec="seconds")
        write_manifest_json(manifest, os.path.join(out, "manifest.json"))
        logger.info(f"Results written to {out}")
    except ConfigException as error:
        exit_code = EXIT_CONFIG
        message = f"Configuration error: {error}"
    except (OSError, DatasetException, CheckpointException) as error:
        exit_code = EXIT_IO
        message = f"I/O error: {error}"
    except NonFiniteLossException as error:
        exit_code = EXIT_NUMERIC
        message = f"Training diverged: {error}"
    except OpticsException as error:
        exit_code = EXIT_NUMERIC
        message = f"Device error ({type(error).__name__}): {error}"
    finally:
        if exit_code != EXIT_OK:
            logger.error(message)
            click.echo(message, err=True)
        finalize_logger(logger)
    ctx.exit(exit_code)


def _common_options(function):
    function = click.option(
        "--seed", type=int, default=None, help="Override training.master_seed."
    )(function)
    function = click.option(
        "--out",
        "out",
        type=click.Path(file_okay=False),
        default="results",
        show_default=True,
        help="Output directory.",
    )(function)
    function = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="Experiment file (key = value lines) or a manifest.json.",
    )(function)
    return function


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="INFO",
    show_default=True,
    help="Console log level.",
)
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx, log_level):
    """Simulated optical neural network experiments."""
    ctx.ensure_object(dict)
    ctx.obj["log_level"] = log_level


@cli.command()
@_common_options
@click.pass_context
def characterize(ctx, config_path, out, seed):
    """Characterize random matrix-vector multiplications on the simulated device."""

    def body(manifest, out, logger):
        settings = manifest.characterize
        rng = np.random.default_rng(manifest.training.master_seed)
        noise_seed = manifest.noise.seed
        if noise_seed is None:
            noise_seed = derive_seeds(manifest.training.master_seed)["noise"]
        real_rows, complex_rows, summary = run_characterization(
            manifest.device,
            settings.sizes,
            settings.complex_sizes,
            settings.matrices,
            settings.vectors,
            settings.weight_sigma,
            rng,
            noise_kind=manifest.noise.kind,
            noise_sigma=manifest.noise.sigma,
            noise_seed=noise_seed,
            logger=logger,
        )
        save_dataframe_to_csv(real_rows, os.path.join(out, "characterization.csv"))
        save_dataframe_to_csv(complex_rows, os.path.join(out, "characterization_complex.csv"))
        save_dataframe_to_csv(pd.DataFrame(summary), os.path.join(out, "metrics.csv"))

        for entry in summary:
            if entry["kind"] == "complex":
                click.echo(
                    f"complex {entry['size']}: RMSE re={entry['rmse_re']:.5f} im={entry['rmse_im']:.5f}"
                )
            else:
                click.echo(f"real {entry['size']}: RMSE={entry['rmse']:.5f}")

    _run(ctx, "characterize", config_path, out, seed, body)


@cli.command("train")
@_common_options
@click.pass_context
def train_command(ctx, config_path, out, seed):
    """Train one network in hybrid, in silico or DENN mode."""

    def body(manifest, out, logger):
        arch = get_architecture(manifest.arch)
        config = manifest.training
        split = _load_split(manifest, logger)
        seeds = derive_seeds(config.master_seed)
        device = _build_device(manifest, arch, seeds)

        if config.mode == "in_silico":
            net, metrics = in_silico_protocol(arch, split, config, device, logger=logger)
        elif config.mode == "hybrid" and arch.loss == "mse":
            net, metrics = train_with_optical_error(split, config, device, arch, logger=logger)
        else:
            net, metrics = train(arch, split, config, device, logger=logger)

        save_dataframe_to_csv(metrics.to_dataframe(), os.path.join(out, "metrics.csv"))
        save_dataframe_to_csv(
            _confusion_frame(metrics.confusion), os.path.join(out, "confusion.csv")
        )
        save_checkpoint(net, arch, os.path.join(out, "checkpoint.txt"), seed=config.master_seed)

        click.echo(f"{arch.name} ({config.mode}): test accuracy {_percent(metrics.test_accuracy)}")
        click.echo(
            f"peak validation accuracy {_percent(metrics.best_val_accuracy)} "
            f"at iteration {metrics.best_iteration}"
        )
        if metrics.digital_test_accuracy is not None:
            click.echo(
                f"digital test accuracy {_percent(metrics.digital_test_accuracy)}, "
                f"device test accuracy {_percent(metrics.device_test_accuracy)}"
            )

    _run(ctx, "train", config_path, out, seed, body)


@cli.command()
@_common_options
@click.pass_context
def sweep(ctx, config_path, out, seed):
    """Compare hybrid and in silico training across noise kinds and levels."""

    def body(manifest, out, logger):
        arch = get_architecture(manifest.arch)
        split = _load_split(manifest, logger)
        table, cell_metrics = noise_sweep(
            arch,
            split,
            manifest.training,
            manifest.device,
            manifest.sweep.kinds,
            manifest.sweep.sigmas,
            noise_seed=manifest.noise.seed,
            workers=manifest.sweep.workers,
            logger=logger,
        )
        save_dataframe_to_csv(table, os.path.join(out, "sweep.csv"))
        cells_dir = os.path.join(out, "cells")
        create_directories(logger, cells_dir)
        for kind, sigma, metrics in cell_metrics:
            save_dataframe_to_csv(
                metrics.to_dataframe(), os.path.join(cells_dir, f"{kind}_sigma{sigma:g}.csv")
            )

        for row in table.itertuples(index=False):
            click.echo(
                f"{row.kind} sigma={row.sigma:g}: hybrid {_percent(row.hybrid_acc)}, "
                f"in silico {_percent(row.in_silico_acc)}, denn {_percent(row.denn_acc)}"
            )

    _run(ctx, "sweep", config_path, out, seed, body)


def main():
    """Main function to run the experiment command line."""
    cli(obj={})


if __name__ == "__main__":
    main()
