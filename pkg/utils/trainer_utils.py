"""
This module runs hybrid (hardware-in-the-loop) and digital training of the optical networks with Adam, evaluates
accuracy and confusion matrices, and compares hybrid against in silico training under weight noise.

Hybrid training measures the optical layer on the device in every forward pass and backpropagates digitally from
those measurements. In silico training trains the digital twin and only then transfers the weights to the device.

Functions:
- derive_seeds: Expand the master seed into the independent init/batch/noise/probes streams.
- adam_update: Apply one bias-corrected Adam step to a network.
- evaluate: Accuracy and confusion matrix over a sample set, digitally or through the device.
- train: Hybrid, in silico or DENN training with best-validation weight selection.
- train_with_optical_error: Hybrid MSE training where the output error is measured optically.
- transfer_and_evaluate: Deploy trained weights to a (noisy) device and evaluate the test set through it.
- in_silico_protocol: Train digitally, then measure the accuracy on the device.
- noise_sweep: Hybrid vs in silico accuracies over a grid of noise kinds and levels.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from utils.dataset_utils import NUM_CLASSES, sample_minibatch
from utils.network_utils import (
    ErrorRecord,
    backward,
    clip_weights,
    deploy,
    forward,
    from_equivalent_real,
    get_architecture,
    init_network,
    loss_value,
    predict,
    real_view,
)
from utils.optics_utils import NoiseSpec, OpticalDevice, mvm_rmse

MODES = ("hybrid", "in_silico", "denn")

# Order of the streams spawned from the master seed
SEED_STREAMS = ("init", "batch", "noise", "probes")


class TrainingException(Exception):
    """Base class for training errors."""

    pass


class NonFiniteLossException(TrainingException):
    """Raised when the training loss becomes NaN or infinite."""

    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"Loss became {loss} at iteration {iteration}")


@dataclass(frozen=True)
class TrainConfig:
    """
    Training hyperparameters.

    Attributes:
        iterations (int): Number of mini-batch updates.
        batch_size (int): Samples per mini-batch.
        learning_rate, beta1, beta2, epsilon (float): Adam parameters.
        init_sigma (float): Standard deviation of the initial weights.
        recalibrate_every (int): Updates between device recalibrations (hybrid mode).
        validate_every (int): Updates between validation evaluations.
        master_seed (int): Seed all training randomness derives from.
        mode (str): 'hybrid', 'in_silico' or 'denn'.
    """

    iterations: int = 500
    batch_size: int = 240
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_sigma: float = 0.5
    recalibrate_every: int = 50
    validate_every: int = 10
    master_seed: int = 1234
    mode: str = "hybrid"

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations cannot be negative")
        for name in ("batch_size", "recalibrate_every", "validate_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("learning_rate", "epsilon", "init_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"Unknown training mode '{self.mode}', expected one of {MODES}")


@dataclass
class RunMetrics:
    """
    Learning curves and final results of one run.

    train_loss[t] and mvm_rmse[t] belong to update t + 1. Validation accuracies are recorded at val_iterations
    (0 is the initial network).
    """

    train_loss: list = field(default_factory=list)
    mvm_rmse: list = field(default_factory=list)
    val_iterations: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    best_val_accuracy: float = float("nan")
    best_iteration: int = 0
    test_accuracy: float = float("nan")
    confusion: np.ndarray = None
    digital_test_accuracy: float = None
    device_test_accuracy: float = None

    def to_dataframe(self):
        """One row per iteration with columns iteration, train_loss, mvm_rmse, val_accuracy (blank when absent)."""
        iterations = len(self.train_loss)
        frame = pd.DataFrame(
            {
                "iteration": np.arange(iterations + 1),
                "train_loss": [np.nan] + list(self.train_loss),
                "mvm_rmse": [np.nan] + list(self.mvm_rmse),
                "val_accuracy": np.nan,
            }
        )
        frame.loc[self.val_iterations, "val_accuracy"] = self.val_accuracy
        return frame


def derive_seeds(master_seed):
    """Expand the master seed into one integer seed per named stream (SeedSequence spawning)."""
    children = np.random.SeedSequence(master_seed).spawn(len(SEED_STREAMS))
    return {
        name: int(child.generate_state(1, np.uint64)[0])
        for name, child in zip(SEED_STREAMS, children)
    }


def adam_update(net, gradients, config):
    """
    Apply one Adam step with bias correction, in place. Complex weights are updated as independent (Re, Im) pairs.

    Args:
        net (NetworkState): Network whose weights and moments are updated.
        gradients (list): Batch-mean gradients shaped like net.weights.
        config (TrainConfig): Supplies learning_rate, beta1, beta2 and epsilon.

    Returns:
        NetworkState: The updated network.
    """
    net.step += 1
    beta1, beta2 = config.beta1, config.beta2
    for index, gradient in enumerate(gradients):
        gradient = real_view(gradient)
        net.first_moments[index] = beta1 * net.first_moments[index] + (1 - beta1) * gradient
        net.second_moments[index] = beta2 * net.second_moments[index] + (1 - beta2) * gradient**2
        m_hat = net.first_moments[index] / (1 - beta1**net.step)
        v_hat = net.second_moments[index] / (1 - beta2**net.step)

        weights = net.weights[index]
        params = real_view(weights) - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        net.weights[index] = params.view(np.complex128) if np.iscomplexobj(weights) else params
    return net


def evaluate(net, arch, samples, device=None, update_epoch=0):
    """
    Classify a sample set and accumulate the confusion matrix (rows true class, columns predicted class).

    With a device, the optical layer is measured on it; the complex network is read out with the LO off.

    Returns:
        tuple: (accuracy, confusion) with confusion a (10, 10) integer array.
    """
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    if len(samples) == 0:
        return float("nan"), confusion
    record = forward(net, arch, samples, device, update_epoch, readout="intensity")
    np.add.at(confusion, (samples.labels, predict(record)), 1)
    return float(np.trace(confusion) / confusion.sum()), confusion


def _batch_mvm_rmse(record, net, arch, device):
    """Error of the measured optical-layer outputs against the ideal product of the nominal weights."""
    ideal = record.inputs @ net.weights[0].T
    measured = record.pre_activations[0]
    if arch.is_complex:
        measured = from_equivalent_real(measured.T).T
        rmse_re, rmse_im = mvm_rmse(measured, ideal, device.norm_max)
        return float(np.sqrt((rmse_re**2 + rmse_im**2) / 2))
    return mvm_rmse(measured, ideal, device.norm_max)


def _resolve_clip_bound(clip_bound, device):
    if clip_bound is not None:
        return clip_bound
    return device.config.clip_bound if device is not None else 1.0


def _run_training(arch, split, config, device, clip_bound, logger, optical_error=False):
    seeds = derive_seeds(config.master_seed)
    batch_rng = np.random.default_rng(seeds["batch"])
    net = init_network(arch, config.init_sigma, np.random.default_rng(seeds["init"]), clip_bound)

    if device is not None:
        deploy(net, arch, device)
        device.recalibrate(update_epoch=0, logger=logger)

    metrics = RunMetrics()
    best_net = net.copy()

    def validate(iteration):
        nonlocal best_net
        accuracy, _ = evaluate(net, arch, split.validation, device, update_epoch=iteration)
        metrics.val_iterations.append(iteration)
        metrics.val_accuracy.append(accuracy)
        # Ties keep the earlier weights
        if iteration == 0 or accuracy > metrics.best_val_accuracy:
            metrics.best_val_accuracy = accuracy
            metrics.best_iteration = iteration
            best_net = net.copy()
        return accuracy

    validate(0)
    for t in range(config.iterations):
        batch = sample_minibatch(split, config.batch_size, batch_rng)
        targets = batch.targets

        record = forward(net, arch, batch, device, update_epoch=t)
        loss = loss_value(record, arch, targets)
        if not np.isfinite(loss):
            raise NonFiniteLossException(t + 1, loss)

        if optical_error:
            delta = device.optical_error(batch.inputs, targets, update_epoch=t)
            errors = ErrorRecord([delta], [], [delta.T @ record.inputs / len(batch)])
        else:
            errors = backward(record, net, arch, targets)

        metrics.train_loss.append(loss)
        metrics.mvm_rmse.append(
            _batch_mvm_rmse(record, net, arch, device) if device is not None else float("nan")
        )
        logger.debug(f"Iteration {t + 1}: loss={loss:.6f}")

        adam_update(net, errors.gradients, config)
        clip_weights(net, clip_bound)

        if device is not None:
            deploy(net, arch, device)
            if (t + 1) % config.recalibrate_every == 0:
                device.recalibrate(update_epoch=t + 1, logger=logger)

        if (t + 1) % config.validate_every == 0 or t + 1 == config.iterations:
            accuracy = validate(t + 1)
            logger.info(
                f"Iteration {t + 1}/{config.iterations}: loss={loss:.4f}, "
                f"mvm_rmse={metrics.mvm_rmse[-1]:.5f}, val_accuracy={accuracy:.4f}"
            )

    if device is not None:
        deploy(best_net, arch, device)
    metrics.test_accuracy, metrics.confusion = evaluate(
        best_net, arch, split.test, device, update_epoch=config.iterations
    )
    logger.info(
        f"Best validation accuracy {metrics.best_val_accuracy:.4f} at iteration {metrics.best_iteration}, "
        f"test accuracy {metrics.test_accuracy:.4f}"
    )
    return best_net, metrics


def train(arch, split, config, device=None, noise=None, clip_bound=None, logger=None):
    """
    Train a network and return the weights with the best validation accuracy.

    In hybrid mode every forward pass measures the optical layer on the device, with the dynamic-noise epoch equal
    to the number of updates applied so far; the device is recalibrated at the start and every recalibrate_every
    updates. In in_silico and denn modes the whole network runs digitally.

    Args:
        arch (Architecture): Network to train.
        split (DatasetSplit): Training, validation and test sets.
        config (TrainConfig): Hyperparameters, seeds and mode.
        device (OpticalDevice): Required in hybrid mode, ignored otherwise.
        noise (NoiseSpec): Optional noise channel to install on the device.
        clip_bound (float): Optical weight bound; defaults to the device's bound, else 1.0.
        logger (logging.Logger): Logger instance to log information during the process.

    Returns:
        tuple: (NetworkState, RunMetrics).

    Raises:
        NonFiniteLossException: If the training loss stops being finite.
    """
    logger = logger or logging.getLogger(__name__)
    if config.mode == "hybrid" and device is None:
        raise ValueError("Hybrid training needs an optical device")
    if noise is not None and device is not None:
        device.noise = noise
    bound = _resolve_clip_bound(clip_bound, device)
    active_device = device if config.mode == "hybrid" else None
    logger.info(f"Training {arch.name} in {config.mode} mode for {config.iterations} iterations")
    return _run_training(arch, split, config, active_device, bound, logger)


def train_with_optical_error(split, config, device, arch=None, clip_bound=None, logger=None):
    """
    Hybrid training of the linear classifier with MSE loss, taking the output error vector z - y from the device's
    optical error readout instead of computing it digitally. Inference reads the network output only.

    Returns:
        tuple: (NetworkState, RunMetrics).
    """
    logger = logger or logging.getLogger(__name__)
    arch = arch or get_architecture("onn1-mse")
    if arch.kind != "onn1_linear" or arch.loss != "mse":
        raise ValueError("Optical error training needs the linear classifier with MSE loss")
    bound = _resolve_clip_bound(clip_bound, device)
    logger.info(f"Training {arch.name} with optical error vectors for {config.iterations} iterations")
    return _run_training(arch, split, config, device, bound, logger, optical_error=True)


def transfer_and_evaluate(net, arch, split, device, update_epoch=0, logger=None):
    """
    Deploy trained weights onto a device, recalibrate it once, and evaluate the test set through it.

    Returns:
        tuple: (accuracy, confusion).
    """
    logger = logger or logging.getLogger(__name__)
    deploy(net, arch, device)
    device.recalibrate(update_epoch=update_epoch, logger=logger)
    accuracy, confusion = evaluate(net, arch, split.test, device, update_epoch)
    logger.info(f"Device accuracy of transferred weights: {accuracy:.4f}")
    return accuracy, confusion


def in_silico_protocol(arch, split, config, device, noise=None, clip_bound=None, logger=None):
    """
    Train the network digitally (noise-free), then deploy it to the device and evaluate the test set there.

    The returned metrics carry both the digital and the device test accuracy; test_accuracy and confusion refer to
    the device evaluation.

    Returns:
        tuple: (NetworkState, RunMetrics).
    """
    logger = logger or logging.getLogger(__name__)
    if noise is not None:
        device.noise = noise
    bound = _resolve_clip_bound(clip_bound, device)
    net, metrics = train(
        arch, split, replace(config, mode="in_silico"), clip_bound=bound, logger=logger
    )
    metrics.digital_test_accuracy = metrics.test_accuracy
    accuracy, confusion = transfer_and_evaluate(
        net, arch, split, device, update_epoch=config.iterations, logger=logger
    )
    metrics.device_test_accuracy = accuracy
    metrics.test_accuracy = accuracy
    metrics.confusion = confusion
    return net, metrics


def _sweep_device(arch, device_config, kind, sigma, seeds):
    noise = NoiseSpec.build(kind, sigma, arch.optical_shape, seeds["noise"], arch.is_complex)
    return OpticalDevice(
        device_config,
        arch.optical_shape,
        noise=noise,
        complex_weights=arch.is_complex,
        probe_seed=seeds["probes"],
    )


def noise_sweep(arch, split, config, device_config, kinds, sigmas, noise_seed=None, workers=1, logger=None):
    """
    Compare hybrid and in silico training over a grid of noise kinds and levels with matched seeds.

    The digital (DENN) network is trained once; each (kind, sigma) cell runs hybrid training on a device with that
    noise and transfers the digital network to an identically noisy device.

    Args:
        arch (Architecture): Network to train.
        split (DatasetSplit): Dataset split.
        config (TrainConfig): Hyperparameters and master seed shared by every cell.
        device_config (DeviceConfig): Device configuration shared by every cell.
        kinds (list): Noise kinds.
        sigmas (list): Noise levels.
        noise_seed (int): Seed of the frozen noise matrices; defaults to the master seed's noise stream.
        workers (int): Cells evaluated in parallel threads.
        logger (logging.Logger): Logger instance to log information during the process.

    Returns:
        tuple: (table, cell_metrics) with the table columns kind, sigma, hybrid_acc, in_silico_acc, denn_acc and
        cell_metrics a list of (kind, sigma, hybrid RunMetrics).
    """
    logger = logger or logging.getLogger(__name__)
    seeds = derive_seeds(config.master_seed)
    if noise_seed is not None:
        seeds["noise"] = noise_seed

    digital_net, digital_metrics = train(
        arch, split, replace(config, mode="denn"), clip_bound=device_config.clip_bound, logger=logger
    )
    denn_accuracy = digital_metrics.test_accuracy
    cells = [(kind, sigma) for kind in kinds for sigma in sigmas]

    def run_cell(cell):
        kind, sigma = cell
        logger.info(f"Noise cell {kind} sigma={sigma}")
        hybrid_device = _sweep_device(arch, device_config, kind, sigma, seeds)
        _, hybrid_metrics = train(
            arch, split, replace(config, mode="hybrid"), hybrid_device, logger=logger
        )
        transfer_device = _sweep_device(arch, device_config, kind, sigma, seeds)
        in_silico_accuracy, _ = transfer_and_evaluate(
            digital_net, arch, split, transfer_device, update_epoch=config.iterations, logger=logger
        )
        return hybrid_metrics, in_silico_accuracy

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
        results = list(executor.map(run_cell, cells))

    table = pd.DataFrame(
        {
            "kind": [kind for kind, _ in cells],
            "sigma": [sigma for _, sigma in cells],
            "hybrid_acc": [metrics.test_accuracy for metrics, _ in results],
            "in_silico_acc": [accuracy for _, accuracy in results],
            "denn_acc": denn_accuracy,
        }
    )
    cell_metrics = [(kind, sigma, metrics) for (kind, sigma), (metrics, _) in zip(cells, results)]
    return table, cell_metrics
