"""
This module simulates the coherent optical matrix-vector multiplier: a 4-bit DMD encodes the positive input vector,
a 10-bit LC-SLM encodes the (real or complex) weight matrix, and an 8-bit camera reads the result through homodyne
interference with a local oscillator (LO). Weight imperfections are injected through three noise channels, and a
recalibration step re-fits the map from camera readings to MVM outputs.

All readout methods accept a single input vector or a (n, inputs) batch of row vectors.

Functions:
- round_half_up: Round to the nearest integer, ties upward.
- quantize_input: Map input components to the DMD's 4-bit levels.
- quantize_weights: Clip weights to the bound and map them to the LC-SLM's mid-tread levels.
- quantize_camera: Map intensities to the camera's grey levels over a given full scale.
- mvm_rmse: Root-mean-square MVM error on the normalized [-1, 1] output scale.
- run_characterization: Run random MVMs per matrix size and collect ideal-vs-measured rows.

Classes:
- DeviceConfig, NoiseSpec, CalibrationState, HomodyneFrame: Device knobs and readout values.
- OpticalDevice: The simulated multiplier.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

NOISE_KINDS = ("none", "static_additive", "static_multiplicative", "dynamic_additive")

LO_PHASES = (0.0, np.pi, np.pi / 2, 3 * np.pi / 2)

# Exact LO phase factors, so the four-phase readout introduces no rounding of its own
PHASE_FACTORS = {0.0: 1.0, np.pi: -1.0, np.pi / 2: 1j, 3 * np.pi / 2: -1j}

# Recalibrations further than this from the identity are worth a warning
CALIBRATION_WARN_THRESHOLD = 0.1


class OpticsException(Exception):
    """Base class for optical multiplier errors."""

    pass


class OutOfRangeException(OpticsException):
    """Raised when an input vector or target leaves the DMD's [0,1] range."""

    pass


class ShapeMismatchException(OpticsException):
    """Raised when a vector or matrix does not fit the device's dimensions."""

    pass


class NotLoadedException(OpticsException):
    """Raised when a readout is requested before any weights were loaded."""

    pass


class SignAmbiguityException(OpticsException):
    """Raised when the total field at the camera would cross zero, making the square root ambiguous."""

    pass


class DegenerateFitException(OpticsException):
    """Raised when the recalibration probes do not determine a gain and offset."""

    pass


def round_half_up(values):
    """Round to the nearest integer with ties going up, used by every quantizer."""
    return np.floor(np.asarray(values) + 0.5)


@dataclass(frozen=True)
class DeviceConfig:
    """
    The simulated hardware's knobs.

    Attributes:
        input_bits (int): DMD resolution per input element.
        weight_bits (int): LC-SLM resolution per weight quadrature.
        camera_bits (int): Camera grey-level depth.
        lo_amplitude (float): Local oscillator field amplitude E_LO.
        clip_bound (float): Largest weight magnitude (per quadrature) the LC-SLM can display.
        signal_scale (float): Field amplitude corresponding to the maximum possible MVM output.
        quantization_enabled (bool): When False, the DMD, LC-SLM and camera are lossless.
        intensity_range (float): With the LO off, fraction of the maximum output that fills the camera full scale.
        response_gain (float): True gain of the grey-level to amplitude map (1.0 is a perfect detector).
        response_offset (float): True offset of the grey-level to amplitude map, in output units.
        probe_count (int): Number of known input vectors run per recalibration.
    """

    input_bits: int = 4
    weight_bits: int = 10
    camera_bits: int = 8
    lo_amplitude: float = 1.0
    clip_bound: float = 1.0
    signal_scale: float = 0.5
    quantization_enabled: bool = True
    intensity_range: float = 0.15
    response_gain: float = 1.0
    response_offset: float = 0.0
    probe_count: int = 16

    def __post_init__(self):
        for name in ("input_bits", "weight_bits", "camera_bits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.clip_bound <= 0:
            raise ValueError("clip_bound must be positive")
        if self.signal_scale <= 0:
            raise ValueError("signal_scale must be positive")
        # The largest normalized output is 1, so this keeps E_LO + E_s positive
        if self.lo_amplitude <= self.signal_scale:
            raise ValueError("lo_amplitude must exceed signal_scale so that E_LO > E_s")
        if self.intensity_range <= 0:
            raise ValueError("intensity_range must be positive")
        if self.response_gain <= 0:
            raise ValueError("response_gain must be positive")
        if self.probe_count < 1:
            raise ValueError("probe_count must be at least 1")

    @property
    def homodyne_full_scale(self):
        """Camera full-scale intensity with the LO on."""
        return (self.lo_amplitude + self.signal_scale) ** 2

    @property
    def intensity_full_scale(self):
        """Camera full-scale intensity with the LO off."""
        return (self.signal_scale * self.intensity_range) ** 2


@dataclass(frozen=True)
class NoiseSpec:
    """
    Which weight-noise channel is active, with its frozen matrices.

    Static additive noise adds a frozen bias drawn from N(0, sigma); static multiplicative noise multiplies by a
    frozen gain drawn from N(1, sigma); dynamic additive noise draws a fresh N(0, sigma) bias for every update epoch.
    Complex weights get independent draws per quadrature (the real and imaginary parts of the frozen arrays).
    """

    kind: str = "none"
    sigma: float = 0.0
    noise_seed: int = 0
    frozen_bias: np.ndarray = field(default=None, repr=False)
    frozen_gain: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"Unknown noise kind '{self.kind}', expected one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ValueError("Noise sigma must be non-negative")
        if (self.frozen_bias is not None) != (self.kind == "static_additive"):
            raise ValueError("A frozen bias is present exactly for static additive noise")
        if (self.frozen_gain is not None) != (self.kind == "static_multiplicative"):
            raise ValueError("A frozen gain is present exactly for static multiplicative noise")
        for frozen in (self.frozen_bias, self.frozen_gain):
            if frozen is not None:
                frozen.setflags(write=False)

    @classmethod
    def build(cls, kind, sigma, shape, noise_seed, complex_valued=False):
        """Sample the frozen matrices for a weight matrix of the given shape."""
        rng = np.random.default_rng(noise_seed)
        frozen_bias = frozen_gain = None
        if kind == "static_additive":
            frozen_bias = _draw(rng, 0.0, sigma, shape, complex_valued)
        elif kind == "static_multiplicative":
            frozen_gain = _draw(rng, 1.0, sigma, shape, complex_valued)
        return cls(kind, sigma, noise_seed, frozen_bias, frozen_gain)

    @property
    def shape(self):
        frozen = self.frozen_bias if self.frozen_bias is not None else self.frozen_gain
        return None if frozen is None else frozen.shape

    def dynamic_bias(self, shape, update_epoch, complex_valued=False):
        """Return the bias for one update epoch; it depends only on (noise_seed, update_epoch)."""
        rng = np.random.default_rng([self.noise_seed, update_epoch])
        return _draw(rng, 0.0, self.sigma, shape, complex_valued)


def _draw(rng, mean, sigma, shape, complex_valued):
    values = rng.normal(mean, sigma, shape)
    if complex_valued:
        values = values + 1j * rng.normal(mean, sigma, shape)
    return values


@dataclass(frozen=True)
class CalibrationState:
    """Affine map applied to recovered amplitudes: output = gain * raw + offset."""

    gain: float = 1.0
    offset: float = 0.0
    last_calibrated_iteration: int = -1

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("Calibration gain must be positive")


@dataclass(frozen=True)
class HomodyneFrame:
    """Camera intensities, one per output unit per LO phase (last axis follows lo_phases)."""

    intensities: np.ndarray
    lo_phases: tuple

    def __post_init__(self):
        if np.any(self.intensities < 0):
            raise ValueError("Camera intensities cannot be negative")

    def at_phase(self, phase):
        return self.intensities[..., self.lo_phases.index(phase)]


def quantize_input(v, config):
    """
    Map input components in [0,1] to the DMD's levels round(v * (2^bits - 1)) / (2^bits - 1).

    Raises:
        OutOfRangeException: If any component lies outside [0,1].
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0.0) or np.any(v > 1.0) or np.any(np.isnan(v)):
        raise OutOfRangeException("DMD inputs must lie in [0, 1]")
    if not config.quantization_enabled:
        return v
    levels = 2**config.input_bits - 1
    return round_half_up(v * levels) / levels


def _quantize_quadrature(values, config):
    max_code = max(2 ** (config.weight_bits - 1) - 1, 1)
    step = config.clip_bound / max_code
    codes = np.clip(round_half_up(values / step), -max_code, max_code)
    return codes * step


def quantize_weights(W, config):
    """
    Clip weights to [-clip_bound, clip_bound] and quantize them with the LC-SLM's mid-tread quantizer.

    The quantizer has step clip_bound / (2^(weight_bits-1) - 1), so zero and both bounds are exact levels.
    Complex weights are clipped and quantized per quadrature.
    """
    W = np.asarray(W)
    bound = config.clip_bound
    if np.iscomplexobj(W):
        real = np.clip(W.real, -bound, bound)
        imag = np.clip(W.imag, -bound, bound)
        if config.quantization_enabled:
            real = _quantize_quadrature(real, config)
            imag = _quantize_quadrature(imag, config)
        return real + 1j * imag

    clipped = np.clip(W.astype(np.float64), -bound, bound)
    if config.quantization_enabled:
        return _quantize_quadrature(clipped, config)
    return clipped


def quantize_camera(intensities, full_scale, config):
    """Saturate intensities at the full scale and map them to the camera's 2^bits - 1 grey-level steps."""
    if not config.quantization_enabled:
        return intensities
    intensities = np.clip(intensities, 0.0, full_scale)
    levels = 2**config.camera_bits - 1
    return round_half_up(intensities / full_scale * levels) * full_scale / levels


def mvm_rmse(measured, ideal, norm_max=1.0):
    """
    Root-mean-square difference between measured and ideal MVM outputs, both divided by norm_max.

    Complex inputs return a (real, imaginary) pair of RMSEs.

    Raises:
        ShapeMismatchException: If the two sides differ in shape.
    """
    measured = np.asarray(measured)
    ideal = np.asarray(ideal)
    if measured.shape != ideal.shape:
        raise ShapeMismatchException(
            f"Measured shape {measured.shape} differs from ideal shape {ideal.shape}"
        )
    error = (measured - ideal) / norm_max
    if np.iscomplexobj(error):
        return (
            float(np.sqrt(np.mean(error.real**2))),
            float(np.sqrt(np.mean(error.imag**2))),
        )
    return float(np.sqrt(np.mean(error**2)))


class OpticalDevice:
    """
    A simulated coherent optical multiplier with a fixed (outputs, inputs) weight shape.

    Args:
        config (DeviceConfig): Quantization, LO and calibration-related knobs.
        shape (tuple): (outputs, inputs) of the weight matrix it displays.
        noise (NoiseSpec): Active weight-noise channel; frozen matrices must match `shape`.
        complex_weights (bool): Whether the LC-SLM encodes complex weights.
        probe_seed: Seed of the dedicated recalibration probe stream.
    """

    def __init__(self, config, shape, noise=None, complex_weights=False, probe_seed=0):
        self.config = config
        self.shape = tuple(shape)
        self.noise = noise or NoiseSpec()
        self.complex_weights = complex_weights
        self.calibration = CalibrationState()
        self.loaded_weights = None
        self.probe_rng = np.random.default_rng(probe_seed)

    @property
    def norm_max(self):
        """Maximum possible output: every input at 1 and every weight at the bound."""
        return self.shape[1] * self.config.clip_bound

    def camera_lsb(self, readout="homodyne"):
        """One camera grey level expressed in output units (amplitude for 'homodyne', |z|^2 for 'intensity')."""
        levels = 2**self.config.camera_bits - 1
        scale = self.norm_max / self.config.signal_scale
        if readout == "intensity":
            return self.config.intensity_full_scale / levels * scale**2
        # Four-phase readout divides an intensity difference by 4 E_LO; amplitude inversion by ~2 E_LO
        return self.config.homodyne_full_scale / levels * scale / (2 * self.config.lo_amplitude)

    def load_weights(self, W):
        """
        Clip and quantize a weight matrix and store it as the displayed (nominal) weights.

        Returns:
            OpticalDevice: This device, updated.

        Raises:
            ShapeMismatchException: If W does not have the device's (outputs, inputs) shape.
        """
        W = np.asarray(W)
        if W.shape != self.shape:
            raise ShapeMismatchException(
                f"Weight shape {W.shape} does not match device shape {self.shape}"
            )
        if np.iscomplexobj(W) and not self.complex_weights:
            raise ShapeMismatchException("Complex weights need a complex-valued device")
        if self.complex_weights:
            W = W.astype(np.complex128)
        self.loaded_weights = quantize_weights(W, self.config)
        return self

    def effective_weights(self, update_epoch=0):
        """Return the loaded weights with the active noise channel applied for the given update epoch."""
        if self.loaded_weights is None:
            raise NotLoadedException("No weights have been loaded onto the device")
        noise = self.noise
        if noise.shape is not None and noise.shape != self.shape:
            raise ShapeMismatchException(
                f"Frozen noise shape {noise.shape} does not match device shape {self.shape}"
            )

        W = self.loaded_weights
        if noise.kind == "static_additive":
            return W + noise.frozen_bias
        if noise.kind == "static_multiplicative":
            gain = noise.frozen_gain
            if self.complex_weights:
                return W.real * gain.real + 1j * W.imag * gain.imag
            return W * gain
        if noise.kind == "dynamic_additive":
            return W + noise.dynamic_bias(self.shape, update_epoch, self.complex_weights)
        return W

    def _prepare_inputs(self, v):
        v = np.asarray(v, dtype=np.float64)
        single = v.ndim == 1
        batch = np.atleast_2d(v)
        if batch.ndim != 2 or batch.shape[1] != self.shape[1]:
            raise ShapeMismatchException(
                f"Input of shape {v.shape} does not fit {self.shape[1]} device inputs"
            )
        return quantize_input(batch, self.config), single

    def _signal_field(self, v, update_epoch):
        v_q, single = self._prepare_inputs(v)
        ideal = v_q @ self.effective_weights(update_epoch).T
        return self.config.signal_scale * ideal / self.norm_max, single

    def _to_output_units(self, amplitude):
        return amplitude * self.norm_max / self.config.signal_scale

    def _apply_response(self, raw):
        """Detector mis-map followed by the stored calibration, applied per quadrature."""
        config, calibration = self.config, self.calibration
        if np.iscomplexobj(raw):
            return self._apply_response(raw.real) + 1j * self._apply_response(raw.imag)
        reported = config.response_gain * raw + config.response_offset
        return calibration.gain * reported + calibration.offset

    def capture_frame(self, v, update_epoch=0, lo_phases=LO_PHASES):
        """
        Simulate the camera frame for the given LO phases: I = |E_LO e^(i phi) + E_s|^2 per output unit, each
        intensity quantized on its own.

        Returns:
            HomodyneFrame: intensities of shape (..., outputs, len(lo_phases)).
        """
        field_s, single = self._signal_field(v, update_epoch)
        config = self.config
        frames = []
        for phase in lo_phases:
            factor = PHASE_FACTORS.get(phase, np.exp(1j * phase))
            intensity = np.abs(config.lo_amplitude * factor + field_s) ** 2
            frames.append(quantize_camera(intensity, config.homodyne_full_scale, config))
        intensities = np.stack(frames, axis=-1)
        if single:
            intensities = intensities[0]
        return HomodyneFrame(intensities, tuple(lo_phases))

    def real_mvm(self, v, update_epoch=0):
        """
        Real-valued MVM read out by homodyne detection with the LO in phase: E_s = sqrt(I) - E_LO.

        Raises:
            OutOfRangeException, ShapeMismatchException, NotLoadedException
        """
        if self.complex_weights:
            raise OpticsException("real_mvm needs real weights, use complex_mvm")
        frame = self.capture_frame(v, update_epoch, lo_phases=(0.0,))
        amplitude = np.sqrt(frame.at_phase(0.0)) - self.config.lo_amplitude
        return self._apply_response(self._to_output_units(amplitude))

    def complex_mvm(self, v, update_epoch=0):
        """Complex-valued MVM from the four-phase readout: Re from phases 0 and pi, Im from pi/2 and 3pi/2."""
        frame = self.capture_frame(v, update_epoch, lo_phases=LO_PHASES)
        k = self.norm_max / (4 * self.config.lo_amplitude * self.config.signal_scale)
        real = (frame.at_phase(0.0) - frame.at_phase(np.pi)) * k
        imag = (frame.at_phase(np.pi / 2) - frame.at_phase(3 * np.pi / 2)) * k
        return self._apply_response(real + 1j * imag)

    def intensity_readout(self, v, update_epoch=0):
        """Output intensities |sum_i w_ji E_i|^2 with the LO switched off, in squared output units."""
        field_s, single = self._signal_field(v, update_epoch)
        config = self.config
        intensity = quantize_camera(np.abs(field_s) ** 2, config.intensity_full_scale, config)
        if single:
            intensity = intensity[0]
        # No LO, so only the gains act on the intensity
        gain = config.response_gain * self.calibration.gain
        return gain**2 * intensity * (self.norm_max / config.signal_scale) ** 2

    def optical_error(self, v, target, update_epoch=0):
        """
        Error vector z - y measured optically: the label field, encoded through the DMD with a pi phase shift,
        interferes destructively with the signal and the LO.

        Raises:
            OutOfRangeException: If the target leaves [0,1].
            SignAmbiguityException: If E_LO + E_s - E_label would not stay positive.
        """
        if self.complex_weights:
            raise OpticsException("optical_error needs real weights")
        field_s, single = self._signal_field(v, update_epoch)
        target = np.atleast_2d(np.asarray(target, dtype=np.float64))
        if target.shape != field_s.shape:
            raise ShapeMismatchException(
                f"Target shape {target.shape} does not match output shape {field_s.shape}"
            )

        config = self.config
        field_label = config.signal_scale * quantize_input(target, config) / self.norm_max
        total = config.lo_amplitude + field_s - field_label
        if np.any(total <= 0):
            raise SignAmbiguityException(
                "Total field E_LO + E_s - E_label crosses zero; raise lo_amplitude"
            )

        intensity = quantize_camera(total**2, config.homodyne_full_scale, config)
        raw = self._to_output_units(np.sqrt(intensity) - config.lo_amplitude)
        error = self._apply_response(raw)
        return error[0] if single else error

    def recalibrate(self, probe_count=None, update_epoch=0, logger=None):
        """
        Re-fit the calibration by running known random probe inputs and least-squares fitting the ideal noise-free
        outputs against the uncalibrated readings.

        Args:
            probe_count (int): Number of probe vectors; defaults to config.probe_count.
            update_epoch (int): Epoch used for dynamic noise during the probe run.
            logger (logging.Logger): Logger instance to log information during the process.

        Returns:
            CalibrationState: The new calibration, also stored on the device.

        Raises:
            NotLoadedException: If no weights are loaded.
            DegenerateFitException: If the probe readings are constant or the fitted gain is not positive.
        """
        logger = logger or logging.getLogger(__name__)
        if self.loaded_weights is None:
            raise NotLoadedException("Load weights before recalibrating")
        probe_count = probe_count or self.config.probe_count
        probes = self.probe_rng.uniform(0.0, 1.0, (probe_count, self.shape[1]))
        ideal = quantize_input(probes, self.config) @ self.loaded_weights.T

        self.calibration = CalibrationState(last_calibrated_iteration=update_epoch)
        if self.complex_weights:
            raw = self.complex_mvm(probes, update_epoch)
            raw = np.concatenate([raw.real.ravel(), raw.imag.ravel()])
            ideal = np.concatenate([ideal.real.ravel(), ideal.imag.ravel()])
        else:
            raw = self.real_mvm(probes, update_epoch).ravel()
            ideal = ideal.ravel()

        if np.ptp(raw) == 0:
            raise DegenerateFitException("Probe readings are constant; cannot fit gain and offset")
        design = np.column_stack([raw, np.ones_like(raw)])
        (gain, offset), *_ = np.linalg.lstsq(design, ideal, rcond=None)
        if not gain > 0:
            raise DegenerateFitException(f"Fitted gain {gain} is not positive")

        self.calibration = CalibrationState(float(gain), float(offset), update_epoch)
        if abs(gain - 1.0) > CALIBRATION_WARN_THRESHOLD:
            logger.warning(f"Recalibration far from identity: gain={gain:.4f}, offset={offset:.4f}")
        else:
            logger.debug(f"Recalibrated at epoch {update_epoch}: gain={gain:.6f}, offset={offset:.6f}")
        return self.calibration


def run_characterization(
    config,
    sizes,
    complex_sizes,
    matrices,
    vectors,
    weight_sigma,
    rng,
    noise_kind="none",
    noise_sigma=0.0,
    noise_seed=0,
    logger=None,
):
    """
    Characterize the multiplier with random MVMs, as in a scatter of measured against ideal outputs.

    Each matrix has entries drawn from N(0, weight_sigma), clipped to the device bound; each input vector is
    uniform in [0,1]. The device is recalibrated after each matrix is loaded. Ideal outputs use the clipped but
    unquantized matrix and unquantized inputs. All values in the returned frames are normalized by the maximum
    possible output.

    Args:
        config (DeviceConfig): Device configuration under test.
        sizes (list): Real (inputs, outputs) sizes.
        complex_sizes (list): Complex (inputs, outputs) sizes.
        matrices (int): Random matrices per size.
        vectors (int): Random input vectors per matrix.
        weight_sigma (float): Standard deviation of the matrix entries.
        rng (np.random.Generator): Source of matrices, inputs and probe seeds.
        noise_kind (str): Noise channel to characterize under; frozen matrices are drawn per size.
        noise_sigma (float): Noise level.
        noise_seed (int): Seed of the frozen noise matrices.
        logger (logging.Logger): Logger instance to log information during the process.

    Returns:
        tuple: (real_rows, complex_rows, summary) with two DataFrames and a list of per-size RMSE dicts.
    """
    logger = logger or logging.getLogger(__name__)
    real_frames, complex_frames, summary = [], [], []

    for complex_valued, size_list in ((False, sizes), (True, complex_sizes)):
        for inputs, outputs in size_list:
            shape = (outputs, inputs)
            size_noise = NoiseSpec.build(noise_kind, noise_sigma, shape, noise_seed, complex_valued)
            device = OpticalDevice(
                config,
                shape,
                noise=size_noise,
                complex_weights=complex_valued,
                probe_seed=int(rng.integers(2**32)),
            )
            ideal_parts, measured_parts = [], []
            for _ in range(matrices):
                W = np.clip(rng.normal(0.0, weight_sigma, shape), -config.clip_bound, config.clip_bound)
                if complex_valued:
                    W = W + 1j * np.clip(
                        rng.normal(0.0, weight_sigma, shape), -config.clip_bound, config.clip_bound
                    )
                v = rng.uniform(0.0, 1.0, (vectors, inputs))
                device.load_weights(W)
                device.recalibrate(logger=logger)
                measured = device.complex_mvm(v) if complex_valued else device.real_mvm(v)
                ideal_parts.append((v @ W.T).ravel() / device.norm_max)
                measured_parts.append(measured.ravel() / device.norm_max)

            ideal = np.concatenate(ideal_parts)
            measured = np.concatenate(measured_parts)
            rmse = mvm_rmse(measured, ideal)

            if complex_valued:
                frame = pd.DataFrame(
                    {
                        "matrix_rows": outputs,
                        "matrix_cols": inputs,
                        "quadrature": np.repeat(["re", "im"], len(ideal)),
                        "ideal": np.concatenate([ideal.real, ideal.imag]),
                        "measured": np.concatenate([measured.real, measured.imag]),
                    }
                )
                complex_frames.append(frame)
                summary.append(
                    {"size": f"{inputs}x{outputs}", "kind": "complex", "rmse_re": rmse[0], "rmse_im": rmse[1]}
                )
                logger.info(
                    f"Complex {inputs}x{outputs}: RMSE re={rmse[0]:.5f}, im={rmse[1]:.5f}"
                )
            else:
                frame = pd.DataFrame(
                    {
                        "matrix_rows": outputs,
                        "matrix_cols": inputs,
                        "ideal": ideal,
                        "measured": measured,
                    }
                )
                real_frames.append(frame)
                summary.append({"size": f"{inputs}x{outputs}", "kind": "real", "rmse": rmse})
                logger.info(f"Real {inputs}x{outputs}: RMSE={rmse:.5f}")
            frame["error"] = frame["measured"] - frame["ideal"]

    real_rows = pd.concat(real_frames, ignore_index=True) if real_frames else pd.DataFrame()
    complex_rows = pd.concat(complex_frames, ignore_index=True) if complex_frames else pd.DataFrame()
    return real_rows, complex_rows, summary
