"""
数据读写测试
"""

import struct

import numpy as np
import pytest

from src.utils.data_io import (DATASET_FILES, Dataset, load_dataset, make_blobs, read_idx_images, read_idx_labels,
                               read_idx_shape, write_idx_images, write_idx_labels)


def _write_split(folder, split, images, labels, rows=3, cols=2, gz=True):
    folder.mkdir(parents=True, exist_ok=True)
    image_file, label_file = DATASET_FILES[split]
    if not gz:
        image_file, label_file = image_file[:-3], label_file[:-3]
    write_idx_images(folder / image_file, images, rows, cols)
    write_idx_labels(folder / label_file, labels)


class TestIdx:

    @pytest.mark.parametrize('name', ['images.idx', 'images.idx.gz'])
    def test_images(self, tmp_path, name):
        raw = np.arange(12, dtype=np.uint8).reshape(2, 6) * 20
        write_idx_images(tmp_path / name, raw, 3, 2)
        images = read_idx_images(tmp_path / name)
        assert images.shape == (2, 6)
        np.testing.assert_allclose(images, raw / 255.0)
        assert read_idx_shape(tmp_path / name) == (3, 2)

    def test_labels(self, tmp_path):
        write_idx_labels(tmp_path / 'labels.gz', np.array([3, 1, 4, 1, 5]))
        np.testing.assert_array_equal(read_idx_labels(tmp_path / 'labels.gz'), [3, 1, 4, 1, 5])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'labels'
        path.write_bytes(struct.pack('>ii', 2051, 1) + b'\x00')
        with pytest.raises(ValueError):
            read_idx_labels(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / 'images'
        path.write_bytes(struct.pack('>iiii', 2051, 2, 28, 28) + b'\x00' * 100)
        with pytest.raises(ValueError):
            read_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / 'labels'
        path.write_bytes(b'\x00\x00')
        with pytest.raises(ValueError):
            read_idx_labels(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_idx_images(tmp_path / 'absent.gz')


class TestLoadDataset:

    def test_blobs_sizes(self):
        train, test = load_dataset('blobs', '.')
        assert (len(train), len(test)) == (600, 300)
        assert train.num_classes == 3 and train.input_dim == 2
        assert train.image_shape is None

    def test_blobs_are_seeded(self):
        np.testing.assert_array_equal(make_blobs(10).images, make_blobs(10).images)
        assert not np.array_equal(make_blobs(10, seed=1).images, make_blobs(10).images)

    def test_idx_train_and_test(self, tmp_path):
        rng = np.random.default_rng(0)
        _write_split(tmp_path / 'mnist', 'train', rng.integers(0, 256, size=(5, 6)), np.arange(5))
        _write_split(tmp_path / 'mnist', 'test', rng.integers(0, 256, size=(3, 6)), np.array([9, 0, 1]), gz=False)
        train, test = load_dataset('mnist', tmp_path)
        assert (len(train), len(test)) == (5, 3)
        assert train.image_shape == (3, 2)
        np.testing.assert_array_equal(test.labels, [9, 0, 1])

    def test_test_split_only(self, tmp_path):
        _write_split(tmp_path / 'fashion-mnist', 'test', np.zeros((2, 6), dtype=np.uint8), np.array([1, 2]))
        test, rest = load_dataset('fashion-mnist-test', tmp_path)
        assert rest is None
        assert len(test) == 2

    def test_missing_without_download(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset('mnist', tmp_path)

    def test_unknown_name(self, tmp_path):
        with pytest.raises(ValueError):
            load_dataset('cifar', tmp_path)


class TestDataset:

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(2), 2)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), np.array([0, 2]), 2)

    def test_one_hot(self):
        dataset = Dataset(np.zeros((3, 2)), np.array([2, 0, 1]), 3)
        np.testing.assert_array_equal(dataset.one_hot(), np.eye(3)[[2, 0, 1]])
        np.testing.assert_array_equal(dataset.one_hot(slice(1, 2)), [[1.0, 0.0, 0.0]])

    def test_subset(self, blobs):
        part = blobs.subset(10, seed=3)
        assert len(part) == 10
        np.testing.assert_array_equal(part.images, blobs.subset(10, seed=3).images)
        assert blobs.subset(None) is blobs
        assert blobs.subset(10_000) is blobs
