import gzip
import struct

import numpy as np
import pytest

from tests.conftest import SMALL_SPLIT_SIZES, striped_images
from utils.dataset_utils import (
    SPLIT_SIZES,
    BadMagicException,
    InvalidImageException,
    RawImage,
    TrailingBytesException,
    TruncatedException,
    WrongCountException,
    area_weights,
    downsample,
    downsample_images,
    load_mnist,
    make_split,
    one_hot,
    parse_idx,
    read_idx_file,
    sample_minibatch,
    serialize_idx,
)
from utils.optics_utils import DeviceConfig, quantize_input


class TestParseIdx:
    """IDX container parsing."""

    def test_minimal_label_file(self):
        data = bytes([0, 0, 8, 1, 0, 0, 0, 3, 5, 0, 9])
        dims, payload = parse_idx(data)
        assert dims == [3]
        assert payload.tolist() == [5, 0, 9]

    def test_single_black_image(self):
        data = struct.pack(">IIII", 0x803, 1, 28, 28) + bytes(784)
        dims, payload = parse_idx(data)
        assert dims == [1, 28, 28]
        assert payload.shape == (784,)
        assert not payload.any()

    def test_bad_magic(self):
        with pytest.raises(BadMagicException):
            parse_idx(bytes([0, 0, 7, 1, 0, 0, 0, 1, 4]))

    def test_truncated_payload(self):
        with pytest.raises(TruncatedException):
            parse_idx(bytes([0, 0, 8, 1, 0, 0, 0, 3, 5, 0]))

    def test_truncated_header(self):
        with pytest.raises(TruncatedException):
            parse_idx(bytes([0, 0, 8, 3, 0, 0, 0, 1]))

    def test_trailing_bytes(self):
        with pytest.raises(TrailingBytesException):
            parse_idx(bytes([0, 0, 8, 1, 0, 0, 0, 1, 5, 6]))

    def test_serialize_then_parse(self, rng):
        payload = rng.integers(0, 256, 2 * 28 * 28).astype(np.uint8)
        dims, parsed = parse_idx(serialize_idx([2, 28, 28], payload))
        assert dims == [2, 28, 28]
        assert np.array_equal(parsed, payload)

    def test_gzip_file(self, tmp_path):
        path = tmp_path / "labels-idx1-ubyte.gz"
        with gzip.open(path, "wb") as file:
            file.write(serialize_idx([4], [1, 2, 3, 4]))
        dims, payload = read_idx_file(str(path))
        assert dims == [4]
        assert payload.tolist() == [1, 2, 3, 4]


class TestRawImage:
    """RawImage invariants."""

    def test_rejects_wrong_shape(self):
        with pytest.raises(InvalidImageException):
            RawImage(np.zeros((28, 27)), 3)

    def test_rejects_label_ten(self):
        with pytest.raises(InvalidImageException):
            RawImage(np.zeros((28, 28)), 10)

    def test_rejects_grey_level_out_of_range(self):
        with pytest.raises(InvalidImageException):
            RawImage(np.full((28, 28), 256), 1)


class TestDownsample:
    """Area-weighted downsampling to 10x10."""

    def test_area_weight_rows_sum_to_one(self):
        weights = area_weights()
        assert weights.shape == (10, 28)
        assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-12, rtol=0)

    def test_zero_image(self):
        sample = downsample(RawImage(np.zeros((28, 28)), 0))
        assert sample.input.shape == (100,)
        assert not sample.input.any()

    def test_white_image_is_exactly_one(self):
        sample = downsample(RawImage(np.full((28, 28), 255), 0))
        assert sample.input.max() <= 1.0
        assert np.array_equal(sample.input, np.ones(100))

    def test_saturated_cells_stay_in_range(self, rng):
        pixels = rng.integers(0, 256, (50, 28, 28))
        pixels[:, :14, :14] = 255
        inputs = downsample_images(pixels)
        assert inputs.max() <= 1.0 and inputs.min() >= 0.0
        assert np.array_equal(inputs[:, 0], np.ones(50))
        quantize_input(inputs, DeviceConfig())

    def test_single_corner_pixel(self):
        pixels = np.zeros((28, 28))
        pixels[0, 0] = 255
        sample = downsample(RawImage(pixels, 5))
        assert sample.input[0] == pytest.approx(1 / 2.8**2, abs=1e-12)
        assert not sample.input[1:].any()
        assert sample.label == 5

    @pytest.mark.parametrize("level", [1, 51, 128, 254, 255])
    def test_constant_image_maps_to_grey_level(self, level):
        sample = downsample(RawImage(np.full((28, 28), level), 2))
        assert np.array_equal(sample.input, np.full(100, level / 255))

    def test_brighter_image_is_componentwise_larger(self):
        dark, bright = downsample_images(np.stack([np.full((28, 28), 10), np.full((28, 28), 200)]))
        assert np.all(bright > dark)

    def test_target_is_one_hot(self):
        sample = downsample(RawImage(np.zeros((28, 28)), 7))
        assert sample.target.tolist() == one_hot(7).tolist()
        assert sample.target.sum() == 1 and sample.target[7] == 1


class TestMakeSplit:
    """Seeded train/validation/test split."""

    @pytest.fixture(scope="class")
    def full_corpus(self):
        labels = np.arange(sum(SPLIT_SIZES)) % 10
        return np.zeros((sum(SPLIT_SIZES), 28, 28), dtype=np.uint8), labels

    def test_default_sizes_and_disjoint(self, full_corpus):
        images, labels = full_corpus
        split = make_split(images, 1, labels)
        assert (len(split.train), len(split.validation), len(split.test)) == (60000, 5000, 5000)
        indices = np.concatenate([split.train_indices, split.validation_indices, split.test_indices])
        assert np.array_equal(np.sort(indices), np.arange(70000))

    def test_same_seed_same_split(self, full_corpus):
        images, labels = full_corpus
        first = make_split(images, 99, labels)
        second = make_split(images, 99, labels)
        assert np.array_equal(first.train_indices, second.train_indices)
        assert np.array_equal(first.test_indices, second.test_indices)

    def test_different_seeds_differ(self, full_corpus):
        images, labels = full_corpus
        first = make_split(images, 1, labels)
        second = make_split(images, 2, labels)
        assert not np.array_equal(first.train_indices[:100], second.train_indices[:100])

    def test_wrong_count(self):
        with pytest.raises(WrongCountException):
            make_split(np.zeros((10, 28, 28), dtype=np.uint8), 0, np.zeros(10, dtype=int))

    def test_raw_image_list(self):
        labels = np.arange(sum(SMALL_SPLIT_SIZES)) % 10
        images = [RawImage(pixels, label) for pixels, label in zip(striped_images(labels), labels)]
        split = make_split(images, 3, sizes=SMALL_SPLIT_SIZES)
        assert np.array_equal(split.train.labels, labels[split.train_indices])
        assert split.train.inputs.min() >= 0 and split.train.inputs.max() <= 1


class TestSampleMinibatch:
    """Mini-batches drawn with replacement."""

    def test_batch_size(self, synthetic_split):
        batch = sample_minibatch(synthetic_split, 240, np.random.default_rng(0))
        assert len(batch) == 240
        assert batch.inputs.shape == (240, 100)

    def test_fixed_state_repeats(self, synthetic_split):
        first = sample_minibatch(synthetic_split, 1, np.random.default_rng(5))
        second = sample_minibatch(synthetic_split, 1, np.random.default_rng(5))
        assert np.array_equal(first.inputs, second.inputs)
        assert first[0].label == second[0].label

    def test_successive_calls_differ(self, synthetic_split):
        rng = np.random.default_rng(5)
        first = sample_minibatch(synthetic_split, 20, rng)
        second = sample_minibatch(synthetic_split, 20, rng)
        assert not np.array_equal(first.inputs, second.inputs)

    def test_rejects_empty_batch(self, synthetic_split):
        with pytest.raises(ValueError):
            sample_minibatch(synthetic_split, 0, np.random.default_rng(0))


class TestLoadMnist:
    """Loading the four standard files."""

    def test_concatenates_train_then_test(self, tmp_path):
        paths = {}
        for part, count in (("train", 3), ("test", 2)):
            labels = np.arange(count) + (5 if part == "test" else 0)
            images = striped_images(labels)
            paths[f"{part}_images"] = tmp_path / f"{part}-images"
            paths[f"{part}_labels"] = tmp_path / f"{part}-labels"
            paths[f"{part}_images"].write_bytes(serialize_idx([count, 28, 28], images))
            paths[f"{part}_labels"].write_bytes(serialize_idx([count], labels))
        images, labels = load_mnist({key: str(path) for key, path in paths.items()})
        assert images.shape == (5, 28, 28)
        assert labels.tolist() == [0, 1, 2, 5, 6]

    @pytest.mark.mnist
    def test_real_files(self, mnist_dir):
        from utils.file_utils import DatasetConfig, resolve_dataset_paths

        images, labels = load_mnist(resolve_dataset_paths(DatasetConfig(data_dir=mnist_dir)))
        assert images.shape == (70000, 28, 28)
        split = make_split(images, 20220401, labels)
        assert (len(split.train), len(split.validation), len(split.test)) == SPLIT_SIZES
