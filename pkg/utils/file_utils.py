"""
This module provides utilities for loading experiment configurations, writing run manifests, exporting DataFrames to
csv files, and saving and loading network checkpoints.

Functions:
- load_config: Parse a key = value experiment file (or an emitted manifest.json) into an ExperimentManifest.
- resolve_dataset_paths: Return the four MNIST IDX file paths of a dataset configuration.
- file_checksum: Return the SHA-256 hex digest of a file.
- write_manifest_json: Write a manifest to a JSON file.
- save_dataframe_to_csv: Save the DataFrame df to a CSV file at the path provided.
- save_checkpoint: Write network weights to a text checkpoint.
- load_checkpoint: Read a text checkpoint back into a NetworkState, bit-exactly.
- create_directories: Take any # of directory paths and create them if they don't exist.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
from dotenv import load_dotenv

from utils import __version__
from utils.dataset_utils import MNIST_FILES
from utils.network_utils import ARCHITECTURE_NAMES, NetworkState, get_architecture
from utils.optics_utils import NOISE_KINDS, DeviceConfig
from utils.trainer_utils import TrainConfig

load_dotenv()

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_MAGIC = "# onn-checkpoint"

TRUE_WORDS = ("true", "yes", "on", "1")
FALSE_WORDS = ("false", "no", "off", "0")


class ConfigException(Exception):
    """Raised when an experiment configuration is invalid."""

    pass


class ParseException(ConfigException):
    """Raised when a configuration line or value cannot be parsed."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


class UnknownKeyException(ConfigException):
    """Raised when a configuration line names a key that does not exist."""

    def __init__(self, key, line_number=None):
        self.key = key
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}unknown key '{key}'")


class CheckpointException(Exception):
    """Raised when a checkpoint file is malformed."""

    pass


@dataclass(frozen=True)
class DatasetConfig:
    """Location of the MNIST files (relative names resolve against data_dir) and the split seed."""

    data_dir: str = None
    train_images: str = MNIST_FILES["train_images"]
    train_labels: str = MNIST_FILES["train_labels"]
    test_images: str = MNIST_FILES["test_images"]
    test_labels: str = MNIST_FILES["test_labels"]
    split_seed: int = 20220401

    def __post_init__(self):
        if self.data_dir is None:
            object.__setattr__(self, "data_dir", os.getenv("ONN_DATA_DIR") or "data")
        if self.split_seed < 0:
            raise ValueError("split_seed must be non-negative")


@dataclass(frozen=True)
class NoiseConfig:
    """Noise channel parameters; the frozen matrices are drawn once the weight shape is known."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"Unknown noise kind '{self.kind}', expected one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be non-negative")


@dataclass(frozen=True)
class CharacterizeConfig:
    """Matrix sizes as (inputs, outputs) pairs and trial counts of the characterization."""

    sizes: tuple = ((100, 10), (100, 25))
    complex_sizes: tuple = ((100, 10),)
    matrices: int = 10
    vectors: int = 100
    weight_sigma: float = 0.5

    def __post_init__(self):
        if self.matrices < 1 or self.vectors < 1:
            raise ValueError("characterize.matrices and characterize.vectors must be at least 1")
        if self.weight_sigma <= 0:
            raise ValueError("characterize.weight_sigma must be positive")
        for inputs, outputs in self.sizes + self.complex_sizes:
            if inputs < 1 or outputs < 1:
                raise ValueError(f"Matrix size {inputs}x{outputs} is empty")


@dataclass(frozen=True)
class SweepConfig:
    """Noise kinds and levels of the noise sweep and the number of worker threads."""

    kinds: tuple = ("static_additive", "static_multiplicative", "dynamic_additive")
    sigmas: tuple = (0.0, 0.1, 0.2, 0.3)
    workers: int = 1

    def __post_init__(self):
        for kind in self.kinds:
            if kind not in NOISE_KINDS:
                raise ValueError(f"Unknown noise kind '{kind}' in sweep.kinds")
        if any(sigma < 0 for sigma in self.sigmas):
            raise ValueError("sweep.sigmas must be non-negative")
        if self.workers < 1:
            raise ValueError("sweep.workers must be at least 1")


@dataclass
class ExperimentManifest:
    """
    Everything that determines a run. Re-running from a manifest's config block reproduces the run.

    Attributes:
        name (str): Experiment name.
        arch (str): Network name ('onn1', 'onn2', 'onn3' or 'onn1-mse').
        training (TrainConfig): Hyperparameters, mode and master seed.
        device (DeviceConfig): Simulated hardware.
        noise (NoiseConfig): Weight-noise channel.
        dataset (DatasetConfig): Dataset location and split seed.
        characterize (CharacterizeConfig): Characterization settings.
        sweep (SweepConfig): Noise sweep grid.
        tool_version (str): Version of the simulator that produced the run.
        dataset_checksums (dict): SHA-256 of each dataset file used.
        started_at, finished_at (str): Wall-clock timestamps (ISO format).
    """

    name: str = "onn-experiment"
    arch: str = "onn1"
    training: TrainConfig = field(default_factory=TrainConfig)
    device: DeviceConfig = field(default_factory=DeviceConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    characterize: CharacterizeConfig = field(default_factory=CharacterizeConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    tool_version: str = __version__
    dataset_checksums: dict = field(default_factory=dict)
    started_at: str = None
    finished_at: str = None

    def config_dict(self):
        """The configuration block, keyed like the experiment file."""
        return {
            "experiment": {"name": self.name},
            "dataset": dataclasses.asdict(self.dataset),
            "device": dataclasses.asdict(self.device),
            "noise": dataclasses.asdict(self.noise),
            "training": {"arch": self.arch, **dataclasses.asdict(self.training)},
            "characterize": dataclasses.asdict(self.characterize),
            "sweep": dataclasses.asdict(self.sweep),
        }

    def to_dict(self):
        return {
            "config": self.config_dict(),
            "tool_version": self.tool_version,
            "dataset_checksums": self.dataset_checksums,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }


# Section name -> dataclass holding its keys
SECTION_TYPES = {
    "dataset": DatasetConfig,
    "device": DeviceConfig,
    "noise": NoiseConfig,
    "training": TrainConfig,
    "characterize": CharacterizeConfig,
    "sweep": SweepConfig,
}

# Keys stored on the manifest itself
MANIFEST_KEYS = {"experiment.name": "name", "training.arch": "arch"}


def _parse_bool(text):
    word = text.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"'{text}' is not a boolean")


def _parse_sizes(value):
    """'100x10, 100x25' (or a JSON list of pairs) -> ((100, 10), (100, 25))."""
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",") if item.strip()]
        pairs = []
        for item in items:
            inputs, separator, outputs = item.lower().partition("x")
            if not separator:
                raise ValueError(f"'{item}' is not an INPUTSxOUTPUTS size")
            pairs.append((int(inputs), int(outputs)))
        return tuple(pairs)
    return tuple((int(inputs), int(outputs)) for inputs, outputs in value)


def _parse_list(value, item_type):
    if isinstance(value, str):
        return tuple(item_type(item.strip()) for item in value.split(",") if item.strip())
    return tuple(item_type(item) for item in value)


LIST_PARSERS = {
    "characterize.sizes": _parse_sizes,
    "characterize.complex_sizes": _parse_sizes,
    "sweep.kinds": lambda value: _parse_list(value, str),
    "sweep.sigmas": lambda value: _parse_list(value, float),
}


def _convert(key, value, field_type):
    """Convert a text (or JSON) value to the type of the field it sets."""
    if key in LIST_PARSERS:
        return LIST_PARSERS[key](value)
    if not isinstance(value, str):
        if value is None or field_type is str:
            return value
        if field_type is int and float(value) != int(value):
            raise ValueError(f"{value} is not an integer")
        return field_type(value)

    text = value.strip()
    if field_type is bool:
        return _parse_bool(text)
    if field_type is int:
        if text.lower() == "none":
            return None
        return int(text)
    if field_type is float:
        return float(text)
    return text


def _read_assignments(path):
    """Yield (line_number, key, value) from a key = value experiment file."""
    section = None
    with open(path, "r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            stripped = line.strip()
            if not stripped or stripped[0] in "#;":
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                section = stripped[1:-1].strip().lower()
                if not section:
                    raise ParseException("empty section header", line_number)
                continue

            key, separator, value = stripped.partition("=")
            key = key.strip().lower()
            if not separator or not key:
                raise ParseException(f"expected 'key = value', got '{stripped}'", line_number)
            if "." not in key and section is not None:
                key = f"{section}.{key}"
            yield line_number, key, value.strip()


def _read_manifest_assignments(path):
    """Yield (None, key, value) from the config block of an emitted manifest.json."""
    with open(path, "r", encoding="utf-8") as file:
        try:
            document = json.load(file)
        except json.JSONDecodeError as error:
            raise ParseException(f"invalid JSON ({error.msg})", error.lineno) from error
    config = document.get("config") if isinstance(document, dict) else None
    if not isinstance(config, dict):
        raise ParseException("manifest has no 'config' block")
    for section, values in config.items():
        for key, value in values.items():
            yield None, f"{section}.{key}", value


def _field_types(section_type):
    return {item.name: item.type for item in dataclasses.fields(section_type)}


def load_config(path):
    """
    Load an experiment configuration and apply every default.

    The file holds `key = value` lines with dotted keys (`training.iterations = 500`); a `[section]` line prefixes
    the undotted keys after it. Lines starting with '#' or ';' are comments. A '.json' path is read as an emitted
    manifest, taking its config block.

    Args:
        path (str): Path of the experiment file.

    Returns:
        ExperimentManifest: The fully defaulted configuration.

    Raises:
        ParseException: If a line or value cannot be parsed (carries the line number).
        UnknownKeyException: If a key does not exist (carries the line number and key).
        ConfigException: If the values violate a configuration invariant.
    """
    reader = _read_manifest_assignments if str(path).endswith(".json") else _read_assignments
    values = {section: {} for section in SECTION_TYPES}
    manifest_values = {}

    for line_number, key, value in reader(path):
        if key in MANIFEST_KEYS:
            manifest_values[MANIFEST_KEYS[key]] = str(value).strip()
            continue
        section, _, name = key.partition(".")
        field_types = _field_types(SECTION_TYPES[section]) if section in SECTION_TYPES else {}
        if name not in field_types:
            raise UnknownKeyException(key, line_number)
        try:
            values[section][name] = _convert(key, value, field_types[name])
        except (TypeError, ValueError) as error:
            raise ParseException(f"invalid value for '{key}': {error}", line_number) from error

    try:
        sections = {section: SECTION_TYPES[section](**values[section]) for section in SECTION_TYPES}
    except (TypeError, ValueError) as error:
        raise ConfigException(str(error)) from error

    arch = manifest_values.get("arch", "onn1")
    if arch not in ARCHITECTURE_NAMES:
        raise ConfigException(
            f"Unknown architecture '{arch}', expected one of {sorted(ARCHITECTURE_NAMES)}"
        )
    return ExperimentManifest(
        name=manifest_values.get("name", "onn-experiment"), arch=arch, **sections
    )


def resolve_dataset_paths(dataset):
    """
    Return the four MNIST file paths keyed like MNIST_FILES. A file that only exists gzip-compressed resolves to
    its '.gz' path.
    """
    paths = {}
    for key in MNIST_FILES:
        path = os.path.join(dataset.data_dir, getattr(dataset, key))
        if not os.path.exists(path) and os.path.exists(path + ".gz"):
            path += ".gz"
        paths[key] = path
    return paths


def file_checksum(file_path):
    """Return the SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(file_path, "rb") as file:
        for chunk in iter(lambda: file.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest_json(manifest, file_path):
    """Write the manifest to a JSON file with sorted keys."""
    with open(file_path, "w", encoding="utf-8") as file:
        json.dump(manifest.to_dict(), file, indent=2, sort_keys=True)
        file.write("\n")


def save_dataframe_to_csv(df, file_path):
    """Save the DataFrame to a CSV file at the path provided."""
    df.to_csv(file_path, index=False, encoding="utf-8")


def _format_entry(value):
    # repr round-trips float64 exactly
    if isinstance(value, complex):
        return f"{value.real!r},{value.imag!r}"
    return repr(float(value))


def _parse_entry(token):
    if "," in token:
        real, imag = token.split(",")
        return complex(float(real), float(imag))
    return float(token)


def save_checkpoint(net, arch, file_path, seed=None):
    """
    Write the network weights to a text checkpoint: a header of `key = value` lines, then for every layer a
    `layer <index> <rows>x<cols> <real|complex>` line followed by one line per weight row. Complex entries are
    written as 're,im'.
    """
    lines = [
        CHECKPOINT_MAGIC,
        f"format_version = {CHECKPOINT_FORMAT_VERSION}",
        f"arch = {arch.name}",
        f"layer_dims = {','.join(str(dim) for dim in arch.layer_dims)}",
        f"seed = {seed}",
    ]
    for index, W in enumerate(net.weights):
        is_complex = np.iscomplexobj(W)
        lines.append(f"layer {index} {W.shape[0]}x{W.shape[1]} {'complex' if is_complex else 'real'}")
        for row in W:
            lines.append(" ".join(_format_entry(complex(x) if is_complex else x) for x in row))
    with open(file_path, "w", encoding="utf-8") as file:
        file.write("\n".join(lines) + "\n")


def load_checkpoint(file_path):
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        tuple: (NetworkState with zero optimizer moments, header dict with arch, layer_dims and seed).

    Raises:
        CheckpointException: If the file is not a valid checkpoint or does not match its declared architecture.
    """
    with open(file_path, "r", encoding="utf-8") as file:
        lines = [line.strip() for line in file if line.strip()]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointException(f"{file_path} is not an onn checkpoint")

    header = {}
    position = 1
    while position < len(lines) and not lines[position].startswith("layer "):
        key, separator, value = lines[position].partition("=")
        if not separator:
            raise CheckpointException(f"Malformed header line '{lines[position]}'")
        header[key.strip()] = value.strip()
        position += 1

    try:
        if int(header["format_version"]) != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointException(f"Unsupported checkpoint version {header['format_version']}")
        layer_dims = tuple(int(dim) for dim in header["layer_dims"].split(","))
        arch = get_architecture(header["arch"], layer_dims)
        seed = None if header["seed"] == "None" else int(header["seed"])
    except (KeyError, ValueError) as error:
        raise CheckpointException(f"Malformed checkpoint header: {error}") from error

    weights = []
    try:
        while position < len(lines):
            _, index, shape, kind = lines[position].split()
            rows, cols = (int(dim) for dim in shape.split("x"))
            block = lines[position + 1 : position + 1 + rows]
            if len(block) != rows:
                raise CheckpointException(f"Layer {index} is truncated")
            values = [[_parse_entry(token) for token in row.split()] for row in block]
            W = np.array(values, dtype=np.complex128 if kind == "complex" else np.float64)
            if W.shape != (rows, cols):
                raise CheckpointException(f"Layer {index} does not have shape {rows}x{cols}")
            weights.append(W)
            position += 1 + rows
    except ValueError as error:
        raise CheckpointException(f"Malformed layer data: {error}") from error

    if [W.shape for W in weights] != arch.weight_shapes:
        raise CheckpointException(
            f"Checkpoint layers {[W.shape for W in weights]} do not match {arch.name} {arch.weight_shapes}"
        )
    return NetworkState(weights), {"arch": arch, "layer_dims": layer_dims, "seed": seed}


def create_directories(logger, *directories):
    """Takes any # of directory paths and create them if they don't exist."""
    for directory in directories:
        if not os.path.exists(directory):
            os.makedirs(directory)
            logger.info(f"{directory} directory created")
