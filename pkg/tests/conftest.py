import os

import numpy as np
import pytest

from utils.dataset_utils import IMAGE_SIZE, NUM_CLASSES, load_mnist, make_split, serialize_idx
from utils.file_utils import DatasetConfig, resolve_dataset_paths
from utils.optics_utils import DeviceConfig, OpticalDevice

SMALL_SPLIT_SIZES = (600, 100, 100)


def striped_images(labels, seed=0):
    """Class k lights the pixel rows that downsample onto input row k; faint pixel noise keeps samples distinct."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    images = rng.integers(0, 30, (len(labels), IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    band = IMAGE_SIZE / NUM_CLASSES
    for label in range(NUM_CLASSES):
        start = int(np.ceil(band * label - 0.5))
        stop = int(np.ceil(band * (label + 1) - 0.5))
        images[labels == label, start:stop, :] = 255
    return images


def write_mnist_files(directory, train_count=60000, test_count=10000):
    """Write the four standard IDX files of a synthetic striped corpus and return the directory."""
    for prefix, count, offset in (("train", train_count, 0), ("t10k", test_count, 1)):
        labels = (np.arange(count) + offset) % NUM_CLASSES
        images = striped_images(labels, seed=offset)
        with open(os.path.join(directory, f"{prefix}-images-idx3-ubyte"), "wb") as file:
            file.write(serialize_idx([count, IMAGE_SIZE, IMAGE_SIZE], images))
        with open(os.path.join(directory, f"{prefix}-labels-idx1-ubyte"), "wb") as file:
            file.write(serialize_idx([count], labels))
    return directory


@pytest.fixture
def rng():
    return np.random.default_rng(20220401)


@pytest.fixture(scope="session")
def synthetic_split():
    """A small class-structured split (600/100/100) that the networks learn within a few dozen updates."""
    labels = np.arange(sum(SMALL_SPLIT_SIZES)) % NUM_CLASSES
    return make_split(striped_images(labels), seed=7, labels=labels, sizes=SMALL_SPLIT_SIZES)


@pytest.fixture
def perfect_config():
    return DeviceConfig(quantization_enabled=False)


@pytest.fixture
def make_device():
    """Factory for devices; without a config the device is quantization-free."""

    def factory(shape, config=None, noise=None, complex_weights=False, probe_seed=0):
        return OpticalDevice(
            config or DeviceConfig(quantization_enabled=False),
            shape,
            noise=noise,
            complex_weights=complex_weights,
            probe_seed=probe_seed,
        )

    return factory


@pytest.fixture(scope="session")
def mnist_dir():
    """Directory holding the real MNIST files; tests using it are skipped without them."""
    data_dir = os.getenv("ONN_DATA_DIR")
    names = (
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    )
    if not data_dir or not all(
        os.path.exists(os.path.join(data_dir, name))
        or os.path.exists(os.path.join(data_dir, name + ".gz"))
        for name in names
    ):
        pytest.skip("MNIST IDX files not found under ONN_DATA_DIR")
    return data_dir


@pytest.fixture(scope="session")
def mnist_split(mnist_dir):
    """The standard 60000/5000/5000 split of the real MNIST files."""
    dataset = DatasetConfig(data_dir=mnist_dir)
    images, labels = load_mnist(resolve_dataset_paths(dataset))
    return make_split(images, dataset.split_seed, labels)
