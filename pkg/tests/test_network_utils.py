import numpy as np
import pytest

from utils.network_utils import (
    Architecture,
    NetworkState,
    RecordMismatchException,
    backward,
    clip_weights,
    deploy,
    equivalent_forward,
    forward,
    from_equivalent_real,
    get_architecture,
    init_network,
    loss_value,
    mse_loss_and_error,
    pairing_matrix,
    predict,
    softmax,
    to_equivalent_real,
)
from utils.optics_utils import DeviceConfig, OpticalDevice, ShapeMismatchException
from utils.trainer_utils import TrainConfig, adam_update


def toy_targets(rng, count, classes):
    return np.eye(classes)[rng.integers(0, classes, count)]


def numeric_gradient(net, arch, inputs, targets, layer, part, step=1e-5):
    """Central finite differences of the mean loss with respect to one layer (one quadrature if complex)."""
    W = net.weights[layer]
    gradient = np.zeros(W.shape)
    unit = 1j if part == "imag" else 1.0
    for index in np.ndindex(W.shape):
        losses = []
        for sign in (1, -1):
            shifted = NetworkState([w.copy() for w in net.weights])
            shifted.weights[layer][index] += sign * step * unit
            losses.append(loss_value(forward(shifted, arch, inputs), arch, targets))
        gradient[index] = (losses[0] - losses[1]) / (2 * step)
    return gradient


def relative_error(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic + numeric), 1e-12)


class TestArchitecture:
    """Architecture names and dimensions."""

    def test_named_dims(self):
        assert get_architecture("onn1").layer_dims == (100, 10)
        assert get_architecture("onn2").layer_dims == (100, 25, 10)
        assert get_architecture("onn3").is_complex
        assert get_architecture("onn1-mse").loss == "mse"

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            get_architecture("onn4")

    def test_optical_shape(self):
        assert get_architecture("onn2").optical_shape == (25, 100)
        assert get_architecture("onn2").weight_shapes == [(25, 100), (10, 25)]

    def test_name_round_trip(self):
        for name in ("onn1", "onn2", "onn3", "onn1-mse"):
            assert get_architecture(name).name == name

    def test_layer_count_checked(self):
        with pytest.raises(ValueError):
            Architecture("onn2_hybrid", (4, 2))


class TestInitAndClip:
    """Initialization and the weight bound."""

    def test_shapes_and_bound(self):
        net = init_network(get_architecture("onn2"), 0.5, np.random.default_rng(0))
        assert [w.shape for w in net.weights] == [(25, 100), (10, 25)]
        assert np.abs(net.weights[0]).max() <= 1.0
        assert net.first_moments[0].shape == (25, 100)

    def test_complex_layer_and_moments(self):
        net = init_network(get_architecture("onn3"), 0.5, np.random.default_rng(0))
        assert np.iscomplexobj(net.weights[0])
        assert net.first_moments[0].shape == (10, 200)

    def test_only_optical_layer_clipped(self):
        net = NetworkState([np.array([[1.3, -0.2]]), np.array([[5.0]])])
        clip_weights(net, 1.0)
        assert net.weights[0].tolist() == [[1.0, -0.2]]
        assert net.weights[1].tolist() == [[5.0]]

    def test_complex_clip_per_quadrature(self):
        net = NetworkState([np.array([[1.5 - 2.0j]])])
        clip_weights(net, 1.0)
        assert net.weights[0][0, 0] == 1.0 - 1.0j


class TestForward:
    """Forward passes."""

    def test_zero_weights_uniform_output(self, rng):
        arch = get_architecture("onn1")
        net = NetworkState([np.zeros((10, 100))])
        record = forward(net, arch, rng.uniform(0, 1, (3, 100)))
        assert np.allclose(record.outputs, 0.1)
        assert loss_value(record, arch, np.eye(10)[:3]) == pytest.approx(np.log(10))

    def test_onn2_toy_by_hand(self):
        arch = Architecture("onn2_hybrid", (2, 2, 2))
        net = NetworkState([np.array([[1.0, -1.0], [0.5, 0.5]]), np.array([[2.0, 0.0], [1.0, -1.0]])])
        record = forward(net, arch, np.array([[0.2, 0.6]]))
        # z1 = [-0.4, 0.4], relu -> [0, 0.4], z2 = [0, -0.4]
        assert np.allclose(record.pre_activations[0], [[-0.4, 0.4]], rtol=0, atol=1e-12)
        assert np.allclose(record.activations[1], [[0.0, 0.4]], rtol=0, atol=1e-12)
        assert np.allclose(record.logits, [[0.0, -0.4]], rtol=0, atol=1e-12)
        assert np.allclose(record.outputs, softmax(np.array([[0.0, -0.4]])), rtol=0, atol=1e-12)

    def test_onn3_intensity_by_hand(self):
        arch = Architecture("onn3_complex", (2, 1))
        net = NetworkState([np.array([[1.0, 1j]])])
        record = forward(net, arch, np.array([[0.6, 0.8]]))
        assert record.logits[0, 0] == pytest.approx(1.0)

    def test_hardware_matches_digital_without_imperfections(self, make_device, rng):
        inputs = rng.uniform(0, 1, (8, 100))
        for name in ("onn1", "onn2", "onn3"):
            arch = get_architecture(name)
            net = init_network(arch, 0.5, np.random.default_rng(1))
            device = make_device(arch.optical_shape, complex_weights=arch.is_complex)
            deploy(net, arch, device)
            digital = forward(net, arch, inputs)
            hardware = forward(net, arch, inputs, device)
            assert hardware.mode == "hardware"
            assert np.allclose(hardware.logits, digital.logits, atol=1e-9, rtol=0)

    def test_onn3_intensity_readout_record(self, make_device, rng):
        arch = get_architecture("onn3")
        net = init_network(arch, 0.5, np.random.default_rng(1))
        device = make_device(arch.optical_shape, complex_weights=True)
        deploy(net, arch, device)
        inputs = rng.uniform(0, 1, (4, 100))
        record = forward(net, arch, inputs, device, readout="intensity")
        assert record.pre_activations[0] is None
        assert np.allclose(record.logits, forward(net, arch, inputs).logits, atol=1e-9)

    def test_predict_ties_to_lower_class(self):
        arch = get_architecture("onn1")
        record = forward(NetworkState([np.zeros((10, 100))]), arch, np.zeros((2, 100)))
        assert predict(record).tolist() == [0, 0]


class TestBackward:
    """Analytic gradients against finite differences."""

    def test_onn1_gradient(self, rng):
        arch = Architecture("onn1_linear", (4, 2))
        net = NetworkState([rng.normal(0, 0.5, (2, 4))])
        inputs, targets = rng.uniform(0, 1, (5, 4)), toy_targets(rng, 5, 2)
        errors = backward(forward(net, arch, inputs), net, arch, targets)
        assert relative_error(errors.gradients[0], numeric_gradient(net, arch, inputs, targets, 0, "real")) < 1e-6

    def test_onn1_single_sample_mse(self, rng):
        arch = Architecture("onn1_linear", (4, 2), loss="mse")
        net = NetworkState([rng.normal(0, 0.5, (2, 4))])
        inputs, targets = rng.uniform(0, 1, (1, 4)), toy_targets(rng, 1, 2)
        errors = backward(forward(net, arch, inputs), net, arch, targets)
        assert relative_error(errors.gradients[0], numeric_gradient(net, arch, inputs, targets, 0, "real")) < 1e-6

    def test_onn2_gradients(self, rng):
        arch = Architecture("onn2_hybrid", (4, 3, 2))
        net = NetworkState([rng.normal(0, 0.5, (3, 4)), rng.normal(0, 0.5, (2, 3))])
        inputs, targets = rng.uniform(0, 1, (6, 4)), toy_targets(rng, 6, 2)
        errors = backward(forward(net, arch, inputs), net, arch, targets)
        for layer in (0, 1):
            numeric = numeric_gradient(net, arch, inputs, targets, layer, "real")
            assert relative_error(errors.gradients[layer], numeric) < 1e-6

    def test_onn3_gradient_both_quadratures(self, rng):
        arch = Architecture("onn3_complex", (4, 2))
        net = NetworkState([rng.normal(0, 0.5, (2, 4)) + 1j * rng.normal(0, 0.5, (2, 4))])
        inputs, targets = rng.uniform(0, 1, (5, 4)), toy_targets(rng, 5, 2)
        gradient = backward(forward(net, arch, inputs), net, arch, targets).gradients[0]
        assert relative_error(gradient.real, numeric_gradient(net, arch, inputs, targets, 0, "real")) < 1e-6
        assert relative_error(gradient.imag, numeric_gradient(net, arch, inputs, targets, 0, "imag")) < 1e-6

    def test_onn3_intensity_derivative_by_hand(self):
        # d|w.E|^2 / dRe(w1) = 2 Re(w.E) E1 with an MSE output so the error is the intensity itself
        arch = Architecture("onn3_complex", (2, 1), loss="mse")
        w = np.array([[0.3 + 0.4j, -0.2 + 0.1j]])
        E = np.array([[0.6, 0.8]])
        net = NetworkState([w])
        record = forward(net, arch, E)
        gradient = backward(record, net, arch, np.zeros((1, 1))).gradients[0]
        field = (E @ w.T)[0, 0]
        intensity = abs(field) ** 2
        assert gradient[0, 0].real == pytest.approx(intensity * 2 * field.real * E[0, 0])
        assert gradient[0, 0].imag == pytest.approx(intensity * 2 * field.imag * E[0, 0])

    def test_perfect_prediction_zero_gradient(self):
        arch = Architecture("onn1_linear", (2, 2), loss="mse")
        net = NetworkState([np.eye(2)])
        inputs = np.array([[1.0, 0.0]])
        errors = backward(forward(net, arch, inputs), net, arch, inputs)
        assert not errors.deltas[0].any()
        assert not errors.gradients[0].any()

    def test_per_sample_gradient_rank_one(self, rng):
        arch = Architecture("onn2_hybrid", (4, 3, 2))
        net = NetworkState([rng.normal(0, 0.5, (3, 4)), rng.normal(0, 0.5, (2, 3))])
        inputs, targets = rng.uniform(0, 1, (1, 4)), toy_targets(rng, 1, 2)
        for gradient in backward(forward(net, arch, inputs), net, arch, targets).gradients:
            assert np.linalg.matrix_rank(gradient) <= 1

    def test_record_mismatch(self, rng):
        net = NetworkState([rng.normal(0, 0.5, (10, 100))])
        record = forward(net, get_architecture("onn1"), rng.uniform(0, 1, (2, 100)))
        with pytest.raises(RecordMismatchException):
            backward(record, net, get_architecture("onn3"), np.eye(10)[:2])
        with pytest.raises(RecordMismatchException):
            backward(record, net, get_architecture("onn1"), np.eye(10)[:3])

    def test_intensity_record_cannot_backpropagate(self, make_device, rng):
        arch = get_architecture("onn3")
        net = init_network(arch, 0.5, np.random.default_rng(0))
        device = make_device(arch.optical_shape, complex_weights=True)
        deploy(net, arch, device)
        record = forward(net, arch, rng.uniform(0, 1, (2, 100)), device, readout="intensity")
        with pytest.raises(RecordMismatchException):
            backward(record, net, arch, np.eye(10)[:2])


class TestEquivalentRealNetwork:
    """The complex layer and its stacked real equivalent."""

    def test_pairing_matrix(self):
        assert pairing_matrix(2).tolist() == [[1, 0, 1, 0], [0, 1, 0, 1]]

    def test_stack_round_trip(self, rng):
        W = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
        stacked, _ = to_equivalent_real(W)
        assert stacked.shape == (6, 5)
        assert np.array_equal(from_equivalent_real(stacked), W)

    def test_outputs_and_adam_steps_agree(self):
        rng = np.random.default_rng(2022)
        arch = Architecture("onn3_complex", (6, 3))
        config = TrainConfig()
        for _ in range(100):
            W = rng.normal(0, 0.5, (3, 6)) + 1j * rng.normal(0, 0.5, (3, 6))
            inputs = rng.uniform(0, 1, (4, 6))
            targets = toy_targets(rng, 4, 3)
            net = NetworkState([W.copy()])

            record = forward(net, arch, inputs)
            stacked, pairing = to_equivalent_real(W)
            hidden_pre, hidden, intensities = equivalent_forward(stacked, pairing, inputs)
            assert np.allclose(record.logits, intensities, atol=1e-10, rtol=0)

            # Backpropagate the equivalent network by hand and take one Adam step on the stacked weights
            delta_hidden = 2 * hidden_pre * ((softmax(intensities) - targets) @ pairing)
            gradient = delta_hidden.T @ inputs / len(inputs)
            m_hat, v_hat = gradient, gradient**2
            stacked_step = stacked - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)

            adam_update(net, backward(record, net, arch, targets).gradients, config)
            assert np.allclose(to_equivalent_real(net.weights[0])[0], stacked_step, atol=1e-10, rtol=0)


class TestMseAndDeploy:
    """MSE error vectors and weight deployment."""

    def test_mse_perfect(self):
        loss, delta = mse_loss_and_error(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        assert loss == 0.0
        assert not delta.any()

    def test_mse_hand_example(self):
        loss, delta = mse_loss_and_error(np.array([0.7]), np.array([1.0]))
        assert loss == pytest.approx(0.045)
        assert delta == pytest.approx([-0.3])

    def test_mse_matches_optical_error(self, rng):
        config = DeviceConfig()
        W = np.clip(rng.normal(0, 0.5, (10, 100)), -1, 1)
        device = OpticalDevice(config, (10, 100)).load_weights(W)
        v = rng.uniform(0, 1, 100)
        target = np.eye(10)[3]
        _, delta = mse_loss_and_error(device.real_mvm(v), target)
        assert np.all(np.abs(device.optical_error(v, target) - delta) <= 10 * device.camera_lsb())

    def test_deploy_exact_without_quantization(self, make_device, rng):
        arch = get_architecture("onn2")
        net = init_network(arch, 0.5, rng)
        device = deploy(net, arch, make_device(arch.optical_shape))
        assert np.array_equal(device.effective_weights(), net.weights[0])

    def test_deploy_clips_device_copy(self, make_device):
        arch = Architecture("onn1_linear", (2, 1))
        device = deploy(NetworkState([np.array([[1.3, 0.2]])]), arch, make_device((1, 2)))
        assert device.loaded_weights.tolist() == [[1.0, 0.2]]

    def test_deploy_shape_mismatch(self, make_device):
        arch = get_architecture("onn1")
        with pytest.raises(ShapeMismatchException):
            deploy(NetworkState([np.zeros((10, 100))]), arch, make_device((25, 100)))
