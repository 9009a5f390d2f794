"""
This module defines the three optical neural network architectures and their digital twins, with forward passes
through the simulated device or purely digitally, and digital backpropagation of the error vectors.

The optical layer is always the first layer. Weight gradients are outer products of each layer's error vector with
the previous layer's activations, averaged over the batch. There are no bias terms.

The complex-valued network is trained through its equivalent real network: the hidden layer holds the real and
imaginary parts of the complex outputs (stacked [Re; Im]), a square activation follows, and a frozen 0/1 pairing
matrix adds each output's two squares into its intensity.

Functions:
- get_architecture: Return the architecture for a command-line name (onn1, onn2, onn3, onn1-mse).
- init_network: Draw initial weights from N(0, sigma) and clip the optical layer.
- clip_weights: Clip the optical layer of a network to the weight bound.
- softmax: Row-wise softmax with max subtraction.
- pairing_matrix: The frozen 0/1 matrix connecting each output to its two hidden units.
- to_equivalent_real / from_equivalent_real: Convert complex weights to and from the stacked real hidden matrix.
- equivalent_forward: Evaluate the equivalent real network.
- forward: Forward pass through the device (hardware mode) or digitally.
- backward: Error vectors and weight gradients for a forward record.
- loss_value: Mean loss of a forward record against its targets.
- mse_loss_and_error: Half squared error and its error vector.
- deploy: Load the optical layer onto a device.
- predict: Predicted classes of a forward record.
"""

from dataclasses import dataclass, field

import numpy as np

from utils.dataset_utils import Sample, SampleSet
from utils.optics_utils import ShapeMismatchException

ARCHITECTURE_DIMS = {
    "onn1_linear": (100, 10),
    "onn2_hybrid": (100, 25, 10),
    "onn3_complex": (100, 10),
}

# Command-line name -> (kind, loss)
ARCHITECTURE_NAMES = {
    "onn1": ("onn1_linear", "cross_entropy"),
    "onn2": ("onn2_hybrid", "cross_entropy"),
    "onn3": ("onn3_complex", "cross_entropy"),
    "onn1-mse": ("onn1_linear", "mse"),
}

LOSSES = ("cross_entropy", "mse")


class NetworkException(Exception):
    """Base class for network errors."""

    pass


class RecordMismatchException(NetworkException):
    """Raised when a forward record does not belong to the network, architecture or targets given."""

    pass


@dataclass(frozen=True)
class Architecture:
    """
    One of the three networks.

    Attributes:
        kind (str): 'onn1_linear', 'onn2_hybrid' or 'onn3_complex'.
        layer_dims (tuple): Neurons per layer, input first.
        loss (str): 'cross_entropy' (digital softmax) or 'mse'.
    """

    kind: str
    layer_dims: tuple = None
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.kind not in ARCHITECTURE_DIMS:
            raise ValueError(f"Unknown architecture '{self.kind}'")
        if self.layer_dims is None:
            object.__setattr__(self, "layer_dims", ARCHITECTURE_DIMS[self.kind])
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) != len(ARCHITECTURE_DIMS[self.kind]):
            raise ValueError(f"{self.kind} needs {len(ARCHITECTURE_DIMS[self.kind])} layer sizes")
        if self.loss not in LOSSES:
            raise ValueError(f"Unknown loss '{self.loss}'")

    @property
    def is_complex(self):
        return self.kind == "onn3_complex"

    @property
    def optical_shape(self):
        """(outputs, inputs) of the optical layer."""
        return (self.layer_dims[1], self.layer_dims[0])

    @property
    def weight_shapes(self):
        dims = self.layer_dims
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    @property
    def name(self):
        for name, (kind, loss) in ARCHITECTURE_NAMES.items():
            if (kind, loss) == (self.kind, self.loss):
                return name
        return self.kind


def get_architecture(name, layer_dims=None):
    """Return the Architecture for 'onn1', 'onn2', 'onn3' or 'onn1-mse'."""
    if name not in ARCHITECTURE_NAMES:
        raise ValueError(
            f"Unknown architecture '{name}', expected one of {sorted(ARCHITECTURE_NAMES)}"
        )
    kind, loss = ARCHITECTURE_NAMES[name]
    return Architecture(kind, layer_dims, loss)


@dataclass
class NetworkState:
    """Per-layer weights (the optical layer first) and the optimizer's moment accumulators."""

    weights: list
    first_moments: list = None
    second_moments: list = None
    step: int = 0

    def __post_init__(self):
        if self.first_moments is None:
            self.first_moments = [np.zeros(real_view(w).shape) for w in self.weights]
        if self.second_moments is None:
            self.second_moments = [np.zeros(real_view(w).shape) for w in self.weights]

    def copy(self):
        return NetworkState(
            [w.copy() for w in self.weights],
            [m.copy() for m in self.first_moments],
            [v.copy() for v in self.second_moments],
            self.step,
        )


def real_view(array):
    """Complex arrays are optimized as interleaved (Re, Im) pairs of independent real parameters."""
    array = np.ascontiguousarray(array)
    return array.view(np.float64) if np.iscomplexobj(array) else array


@dataclass
class ForwardRecord:
    """
    Values of one forward pass over a batch.

    pre_activations[l] and activations[l + 1] belong to layer l + 1; activations[0] is the network input. For the
    complex network the first layer is the hidden layer of the equivalent real network (stacked [Re z; Im z] and its
    squares) and the second is the pairing layer producing the intensities. With intensity readout the hidden values
    are not measured and are None.
    """

    arch_kind: str
    mode: str
    pre_activations: list
    activations: list
    readout: str = "digital"

    @property
    def inputs(self):
        return self.activations[0]

    @property
    def logits(self):
        return self.pre_activations[-1]

    @property
    def outputs(self):
        return self.activations[-1]


@dataclass
class ErrorRecord:
    """Per-layer error vectors, backpropagated sums and batch-mean weight gradients."""

    deltas: list
    rhos: list
    gradients: list = field(default_factory=list)


def init_network(arch, init_sigma, rng, clip_bound=1.0):
    """
    Draw every weight from N(0, init_sigma); complex weights draw both quadratures. The optical layer is clipped.

    Returns:
        NetworkState: The initial network with zero optimizer moments.
    """
    weights = []
    for index, shape in enumerate(arch.weight_shapes):
        W = rng.normal(0.0, init_sigma, shape)
        if arch.is_complex and index == 0:
            W = W + 1j * rng.normal(0.0, init_sigma, shape)
        weights.append(W)
    net = NetworkState(weights)
    return clip_weights(net, clip_bound)


def clip_weights(net, clip_bound):
    """Clip the optical layer (per quadrature when complex) to [-clip_bound, clip_bound], in place."""
    W = net.weights[0]
    if np.iscomplexobj(W):
        net.weights[0] = np.clip(W.real, -clip_bound, clip_bound) + 1j * np.clip(
            W.imag, -clip_bound, clip_bound
        )
    else:
        net.weights[0] = np.clip(W, -clip_bound, clip_bound)
    return net


def softmax(logits):
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exponentials = np.exp(shifted)
    return exponentials / np.sum(exponentials, axis=-1, keepdims=True)


def pairing_matrix(outputs):
    """The (outputs, 2*outputs) 0/1 matrix adding hidden units j (real part) and outputs + j (imaginary part)."""
    return np.hstack([np.eye(outputs), np.eye(outputs)])


def to_equivalent_real(W):
    """Return the stacked hidden matrix [Re W; Im W] and the pairing matrix of the equivalent real network."""
    W = np.asarray(W)
    return np.vstack([W.real, W.imag]), pairing_matrix(W.shape[0])


def from_equivalent_real(W_stack):
    """Rebuild complex weights from the stacked [Re; Im] hidden matrix."""
    outputs = W_stack.shape[0] // 2
    return W_stack[:outputs] + 1j * W_stack[outputs:]


def equivalent_forward(W_stack, pairing, inputs):
    """
    Evaluate the equivalent real network.

    Returns:
        tuple: (hidden pre-activations, squared hidden activations, output intensities).
    """
    hidden_pre = np.atleast_2d(inputs) @ W_stack.T
    hidden = hidden_pre**2
    return hidden_pre, hidden, hidden @ pairing.T


def _batch_inputs(samples):
    if isinstance(samples, SampleSet):
        return samples.inputs
    if isinstance(samples, Sample):
        return samples.input[None, :]
    return np.atleast_2d(np.asarray(samples, dtype=np.float64))


def _output_activation(arch, logits):
    return softmax(logits) if arch.loss == "cross_entropy" else logits


def forward(net, arch, samples, device=None, update_epoch=0, readout="quadrature"):
    """
    Forward pass over a batch, through the device in hardware mode or digitally when no device is given.

    Args:
        net (NetworkState): The nominal weights.
        arch (Architecture): Network architecture.
        samples: A SampleSet, a Sample, or an (n, inputs) array.
        device (OpticalDevice): The device holding the deployed optical layer, or None for digital mode.
        update_epoch (int): Dynamic-noise epoch (the number of weight updates applied so far).
        readout (str): For the complex network in hardware mode, 'quadrature' (four-phase readout, used in
            training) or 'intensity' (LO off, used at inference).

    Returns:
        ForwardRecord: Pre-activations and activations of every layer.
    """
    inputs = _batch_inputs(samples)
    mode = "digital" if device is None else "hardware"

    if arch.is_complex:
        W = net.weights[0]
        if device is None:
            z = inputs @ W.T
            record_readout = "digital"
        elif readout == "intensity":
            intensities = device.intensity_readout(inputs, update_epoch)
            return ForwardRecord(
                arch.kind,
                mode,
                [None, intensities],
                [inputs, None, _output_activation(arch, intensities)],
                readout="intensity",
            )
        else:
            z = device.complex_mvm(inputs, update_epoch)
            record_readout = "quadrature"
        hidden_pre = np.hstack([z.real, z.imag])
        hidden = hidden_pre**2
        intensities = hidden @ pairing_matrix(W.shape[0]).T
        return ForwardRecord(
            arch.kind,
            mode,
            [hidden_pre, intensities],
            [inputs, hidden, _output_activation(arch, intensities)],
            readout=record_readout,
        )

    if device is None:
        z1 = inputs @ net.weights[0].T
    else:
        z1 = device.real_mvm(inputs, update_epoch)
    record_readout = "digital" if device is None else "homodyne"

    if arch.kind == "onn1_linear":
        return ForwardRecord(
            arch.kind, mode, [z1], [inputs, _output_activation(arch, z1)], record_readout
        )

    # Hybrid network: digital ReLU and digital dense layer after the optical layer
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ net.weights[1].T
    return ForwardRecord(
        arch.kind,
        mode,
        [z1, z2],
        [inputs, a1, _output_activation(arch, z2)],
        record_readout,
    )


def _check_record(record, net, arch, targets):
    if record.arch_kind != arch.kind:
        raise RecordMismatchException(
            f"Record of a {record.arch_kind} network given for {arch.kind}"
        )
    if record.inputs.shape[1] != net.weights[0].shape[1]:
        raise RecordMismatchException("Record inputs do not match the optical layer width")
    if targets.shape != record.outputs.shape:
        raise RecordMismatchException(
            f"Targets of shape {targets.shape} do not match outputs {record.outputs.shape}"
        )
    if arch.is_complex and record.pre_activations[0] is None:
        raise RecordMismatchException(
            "Intensity-only readout has no quadratures to backpropagate through"
        )


def backward(record, net, arch, targets):
    """
    Backpropagate the output error of a forward record.

    The output-layer error is outputs - targets (softmax with cross-entropy, or identity with MSE). Hidden errors
    follow delta = g'(z) * rho with rho computed from the nominal weights. Gradients use the record's activations,
    which are hardware-measured in hybrid mode.

    Args:
        record (ForwardRecord): Output of forward on the same network.
        net (NetworkState): Nominal weights.
        arch (Architecture): Network architecture.
        targets (np.ndarray): (n, outputs) one-hot targets.

    Returns:
        ErrorRecord: Error vectors, rho sums and batch-mean gradients shaped like net.weights.

    Raises:
        RecordMismatchException: If the record does not belong to this network or these targets.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    _check_record(record, net, arch, targets)
    count = len(targets)
    delta_out = record.outputs - targets

    if arch.kind == "onn1_linear":
        gradient = delta_out.T @ record.inputs / count
        return ErrorRecord([delta_out], [], [gradient])

    if arch.kind == "onn2_hybrid":
        rho = delta_out @ net.weights[1]
        delta_hidden = (record.pre_activations[0] > 0) * rho
        gradients = [
            delta_hidden.T @ record.inputs / count,
            delta_out.T @ record.activations[1] / count,
        ]
        return ErrorRecord([delta_hidden, delta_out], [rho], gradients)

    # Complex network through its equivalent real network; the pairing layer is frozen
    hidden_pre = record.pre_activations[0]
    rho = delta_out @ pairing_matrix(delta_out.shape[1])
    delta_hidden = 2.0 * hidden_pre * rho
    stacked_gradient = delta_hidden.T @ record.inputs / count
    return ErrorRecord(
        [delta_hidden, delta_out], [rho], [from_equivalent_real(stacked_gradient)]
    )


def loss_value(record, arch, targets):
    """Mean loss over the batch: cross-entropy of the softmax, or half the squared error."""
    targets = np.atleast_2d(targets)
    logits = record.logits
    if arch.loss == "mse":
        return float(np.mean(0.5 * np.sum((logits - targets) ** 2, axis=1)))
    peak = np.max(logits, axis=1, keepdims=True)
    log_norm = peak[:, 0] + np.log(np.sum(np.exp(logits - peak), axis=1))
    return float(np.mean(log_norm - np.sum(logits * targets, axis=1)))


def mse_loss_and_error(z, y):
    """
    Return (loss, delta) with loss = 0.5 * sum((z - y)^2) and delta = z - y.

    Batches (2-D inputs) give one loss per row.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"Output shape {z.shape} differs from target shape {y.shape}")
    delta = z - y
    loss = 0.5 * np.sum(delta**2, axis=-1)
    return (float(loss) if loss.ndim == 0 else loss), delta


def deploy(net, arch, device):
    """
    Load the optical layer onto the device; digital layers stay in the computer.

    Raises:
        ShapeMismatchException: If the device's shape differs from the optical layer's.
    """
    if device.shape != arch.optical_shape:
        raise ShapeMismatchException(
            f"Device shape {device.shape} does not match optical layer {arch.optical_shape}"
        )
    return device.load_weights(net.weights[0])


def predict(record):
    """Predicted classes (argmax of the output scores, ties toward the lower class)."""
    return np.argmax(record.logits, axis=1)
