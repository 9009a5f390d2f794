"""
This module ingests the MNIST handwritten digits from the standard IDX files, downsamples each bitmap to the 10x10 input
vector of the optical multiplier, and produces the seeded train/validation/test splits and mini-batches used in training.

Functions:
- parse_idx: Parse an IDX byte sequence into its declared dimensions and its unsigned 8-bit payload.
- serialize_idx: Build an IDX byte sequence from dimensions and a payload.
- read_idx_file: Read an IDX file (optionally gzip-compressed) and parse it.
- load_mnist: Load and concatenate the four standard MNIST IDX files into 70000 images and labels.
- area_weights: Return the fractional box-filter matrix that maps a source axis onto a smaller target axis.
- downsample: Downsample one RawImage into a Sample.
- downsample_images: Downsample a stack of 28x28 images into flattened input vectors.
- make_split: Build the seeded 60000/5000/5000 split of the full dataset.
- sample_minibatch: Draw a mini-batch with replacement from the training set.
"""

import gzip
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

IMAGE_SIZE = 28
INPUT_SIZE = 10
NUM_CLASSES = 10
SPLIT_SIZES = (60000, 5000, 5000)

# Rounding slack of the area-weighted sums, in grey levels
GREY_LEVEL_SNAP = 1e-9

# Magic word -> number of dimensions; only unsigned byte payloads are supported
IDX_MAGIC_DIMS = {0x00000801: 1, 0x00000803: 3}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class DatasetException(Exception):
    """Base class for dataset errors."""

    pass


class IdxFormatException(DatasetException):
    """Raised when an IDX byte sequence does not follow the container format."""

    pass


class BadMagicException(IdxFormatException):
    """Raised when the IDX magic word is not a supported label or image magic."""

    pass


class TruncatedException(IdxFormatException):
    """Raised when the header or payload is shorter than declared."""

    pass


class TrailingBytesException(IdxFormatException):
    """Raised when the payload is longer than declared."""

    pass


class WrongCountException(DatasetException):
    """Raised when the number of images does not match the split sizes."""

    pass


class InvalidImageException(DatasetException):
    """Raised when a raw image is not a 28x28 grey-level bitmap with a label 0-9."""

    pass


@dataclass(frozen=True)
class RawImage:
    """A 28x28 grid of 8-bit grey levels and its digit label."""

    pixels: np.ndarray
    label: int

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.shape != (IMAGE_SIZE, IMAGE_SIZE):
            raise InvalidImageException(
                f"Expected {IMAGE_SIZE}x{IMAGE_SIZE} pixels, got shape {pixels.shape}"
            )
        if pixels.min() < 0 or pixels.max() > 255:
            raise InvalidImageException("Pixel grey levels must lie in 0-255")
        if not 0 <= int(self.label) < NUM_CLASSES:
            raise InvalidImageException(f"Label {self.label} is not a digit")
        object.__setattr__(self, "pixels", pixels.astype(np.uint8))
        object.__setattr__(self, "label", int(self.label))


def one_hot(labels, num_classes=NUM_CLASSES):
    """Return the one-hot target rows for an array of integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    targets = np.zeros(labels.shape + (num_classes,))
    np.put_along_axis(targets, labels[..., None], 1.0, axis=-1)
    return targets


@dataclass(frozen=True)
class Sample:
    """One network input in [0,1] with its label."""

    input: np.ndarray
    label: int

    @property
    def target(self):
        return one_hot(self.label)


@dataclass(frozen=True)
class SampleSet:
    """
    A batch of samples stored row-wise, so forward and backward passes can run vectorized.

    Attributes:
        inputs (np.ndarray): (n, 100) input vectors in [0,1].
        labels (np.ndarray): (n,) integer labels.
    """

    inputs: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, index):
        return Sample(self.inputs[index], int(self.labels[index]))

    @property
    def targets(self):
        return one_hot(self.labels)

    def subset(self, indices):
        """Return the samples at the given indices, in that order."""
        indices = np.asarray(indices, dtype=np.int64)
        return SampleSet(self.inputs[indices], self.labels[indices])


@dataclass(frozen=True)
class DatasetSplit:
    """The disjoint training, validation and test sets, with the permutation that produced them."""

    train: SampleSet
    validation: SampleSet
    test: SampleSet
    split_seed: int
    train_indices: np.ndarray = field(repr=False)
    validation_indices: np.ndarray = field(repr=False)
    test_indices: np.ndarray = field(repr=False)


def parse_idx(data):
    """
    Parse an IDX byte sequence into its declared dimensions and its unsigned 8-bit payload.

    Args:
        data (bytes): The full IDX container: big-endian magic, big-endian 32-bit dimension sizes, then the payload.

    Returns:
        tuple: (dims, payload) where dims is a list of ints and payload a flat uint8 array of product(dims) bytes.

    Raises:
        BadMagicException: If the magic word is not 0x00000801 or 0x00000803.
        TruncatedException: If the header or payload is shorter than declared.
        TrailingBytesException: If the payload is longer than declared.
    """
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedException("IDX header is shorter than the 4-byte magic word")

    (magic,) = struct.unpack(">I", data[:4])
    if magic not in IDX_MAGIC_DIMS:
        raise BadMagicException(f"Unknown IDX magic word 0x{magic:08x}")

    ndim = IDX_MAGIC_DIMS[magic]
    header_size = 4 + 4 * ndim
    if len(data) < header_size:
        raise TruncatedException(
            f"IDX header declares {ndim} dimensions but only {len(data)} bytes are present"
        )
    dims = list(struct.unpack(f">{ndim}I", data[4:header_size]))

    expected = int(np.prod(dims, dtype=np.int64))
    actual = len(data) - header_size
    if actual < expected:
        raise TruncatedException(
            f"IDX payload has {actual} bytes, {expected} declared for dims {dims}"
        )
    if actual > expected:
        raise TrailingBytesException(
            f"IDX payload has {actual - expected} bytes beyond the declared {expected}"
        )

    payload = np.frombuffer(data, dtype=np.uint8, offset=header_size).copy()
    return dims, payload


def serialize_idx(dims, payload):
    """Build an IDX byte sequence (label magic for 1 dim, image magic for 3 dims) from dims and a uint8 payload."""
    magic = {ndim: magic for magic, ndim in IDX_MAGIC_DIMS.items()}.get(len(dims))
    if magic is None:
        raise ValueError(f"IDX files here carry 1 or 3 dimensions, not {len(dims)}")
    payload = np.asarray(payload, dtype=np.uint8).ravel()
    header = struct.pack(f">I{len(dims)}I", magic, *dims)
    return header + payload.tobytes()


def read_idx_file(path):
    """Read an IDX file from disk, transparently decompressing a '.gz' file, and parse it."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as file:
        return parse_idx(file.read())


def load_mnist(paths, logger=None):
    """
    Load the four standard MNIST IDX files and concatenate them in file order (training file first).

    Args:
        paths (dict): File paths keyed by 'train_images', 'train_labels', 'test_images', 'test_labels'.
        logger (logging.Logger): Logger instance to log information during the process.

    Returns:
        tuple: (images, labels) with images a (70000, 28, 28) uint8 array and labels a (70000,) int array.

    Raises:
        DatasetException: If image and label files disagree or contain invalid values.
    """
    logger = logger or logging.getLogger(__name__)
    images, labels = [], []

    for part in ("train", "test"):
        image_dims, image_payload = read_idx_file(paths[f"{part}_images"])
        label_dims, label_payload = read_idx_file(paths[f"{part}_labels"])

        if len(image_dims) != 3 or image_dims[1:] != [IMAGE_SIZE, IMAGE_SIZE]:
            raise DatasetException(
                f"{paths[f'{part}_images']} does not hold 28x28 images (dims {image_dims})"
            )
        if len(label_dims) != 1 or label_dims[0] != image_dims[0]:
            raise DatasetException(
                f"{part} label count {label_dims} does not match image count {image_dims[0]}"
            )
        if label_payload.size and label_payload.max() >= NUM_CLASSES:
            raise DatasetException(f"{paths[f'{part}_labels']} has labels above 9")

        images.append(image_payload.reshape(image_dims))
        labels.append(label_payload.astype(np.int64))
        logger.info(f"Loaded {image_dims[0]} {part} images")

    return np.concatenate(images), np.concatenate(labels)


def area_weights(source_size=IMAGE_SIZE, target_size=INPUT_SIZE):
    """
    Return the (target_size, source_size) matrix of fractional box-filter weights.

    Target cell k covers the source interval [k*s, (k+1)*s) with s = source_size/target_size; each weight is the
    overlap of that interval with source pixel i, divided by s, so every row sums to 1.
    """
    edges = np.arange(target_size + 1) * source_size / target_size
    pixel_starts = np.arange(source_size)
    overlap = np.minimum(pixel_starts[None, :] + 1, edges[1:, None]) - np.maximum(
        pixel_starts[None, :], edges[:-1, None]
    )
    return np.clip(overlap, 0.0, None) * target_size / source_size


def downsample_images(pixels, chunk_size=10000):
    """Downsample a (n, 28, 28) stack of grey levels to (n, 100) row-major input vectors in [0,1]."""
    pixels = np.asarray(pixels)
    weights = area_weights()
    inputs = np.empty((len(pixels), INPUT_SIZE * INPUT_SIZE))
    # Chunked so the float copy of the full dataset never exists at once
    for start in range(0, len(pixels), chunk_size):
        chunk = pixels[start : start + chunk_size].astype(np.float64)
        small = weights @ chunk @ weights.T
        # Cells that average to a whole grey level (e.g. saturated ones) snap to it, so c/255 is exact
        levels = np.round(small)
        small = np.where(np.abs(small - levels) < GREY_LEVEL_SNAP, levels, small)
        inputs[start : start + chunk_size] = small.reshape(len(chunk), -1) / 255.0
    return np.clip(inputs, 0.0, 1.0, out=inputs)


def downsample(image):
    """Downsample one RawImage to a Sample by area-weighted averaging onto a 10x10 grid."""
    return Sample(downsample_images(image.pixels[None])[0], image.label)


def make_split(images, seed, labels=None, sizes=SPLIT_SIZES):
    """
    Build the seeded train/validation/test split of the full dataset.

    Args:
        images: Either a list of RawImage or a (N, 28, 28) uint8 array (then `labels` is required).
        seed (int): The split seed; identical seeds give identical membership.
        labels (np.ndarray): Labels matching an image array.
        sizes (tuple): Sizes of the training, validation and test sets.

    Returns:
        DatasetSplit: The three disjoint sets.

    Raises:
        WrongCountException: If the number of images differs from sum(sizes).
    """
    if labels is None:
        labels = np.array([image.label for image in images], dtype=np.int64)
        images = np.stack([image.pixels for image in images]) if len(images) else []

    if len(images) != sum(sizes):
        raise WrongCountException(
            f"Expected {sum(sizes)} images for a {sizes} split, got {len(images)}"
        )

    permutation = np.random.default_rng(seed).permutation(len(images))
    train_end = sizes[0]
    validation_end = sizes[0] + sizes[1]
    index_sets = (
        permutation[:train_end],
        permutation[train_end:validation_end],
        permutation[validation_end:],
    )

    inputs = downsample_images(images)
    labels = np.asarray(labels, dtype=np.int64)
    train, validation, test = (
        SampleSet(inputs[indices], labels[indices]) for indices in index_sets
    )

    return DatasetSplit(
        train=train,
        validation=validation,
        test=test,
        split_seed=seed,
        train_indices=index_sets[0],
        validation_indices=index_sets[1],
        test_indices=index_sets[2],
    )


def sample_minibatch(split, batch_size, rng):
    """
    Draw `batch_size` training samples uniformly with replacement.

    Args:
        split (DatasetSplit): The dataset split to draw from.
        batch_size (int): Number of samples in the batch.
        rng (np.random.Generator): Batch stream; advanced by the draw.

    Returns:
        SampleSet: The mini-batch.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be at least 1, got {batch_size}")
    indices = rng.integers(0, len(split.train), size=batch_size)
    return split.train.subset(indices)
