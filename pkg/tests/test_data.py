import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lpsgd.data import (
    Dataset,
    PcaModel,
    fit_pca,
    load_idx,
    load_mnist,
    load_projected,
    parse_idx,
    save_idx,
    save_projected,
    synthetic_blobs,
    to_idx_bytes,
    transform,
)
from lpsgd.exceptions import DomainError, IdxParseError

LABELS = b"\x00\x00\x08\x01" + (2).to_bytes(4, "big") + bytes([7, 2])
IMAGES = b"\x00\x00\x08\x03" + b"".join(n.to_bytes(4, "big") for n in (2, 2, 3)) + bytes(range(0, 240, 20))


def class_means(dataset):
    return np.array([dataset.features[dataset.labels == c].mean(axis=0) for c in range(dataset.num_classes)])


class TestIdx:
    def test_labels(self):
        labels = parse_idx(LABELS)
        assert labels.dtype == np.int64
        assert labels.tolist() == [7, 2]

    def test_images_are_flattened_and_scaled(self):
        images = parse_idx(IMAGES)
        assert images.shape == (2, 6)
        assert_allclose(images[1], np.arange(120, 240, 20) / 255.0)
        assert images.max() <= 1.0

    @pytest.mark.parametrize(
        "raw, message, offset",
        [
            (b"\x00\x00", "truncated magic number", 2),
            (b"\x12\x34\x08\x01" + LABELS[4:], "bad magic number", 0),
            (b"\x00\x00\x08\x02" + LABELS[4:], "unsupported element type", 0),
            (b"\x00\x00\x09\x01" + LABELS[4:], "unsupported element type", 0),
            (IMAGES[:10], "truncated dimension sizes", 10),
            (LABELS[:9], "truncated payload", 9),
            (b"\x00\x00\x08\x03" + b"\xff\xff\xff\xff" * 3, "dimension overflow", 4),
        ],
    )
    def test_malformed(self, raw, message, offset):
        with pytest.raises(IdxParseError) as info:
            parse_idx(raw)
        assert message in str(info.value)
        assert info.value.offset == offset

    def test_error_names_the_file(self, tmp_path):
        path = tmp_path / "broken-idx1-ubyte"
        path.write_bytes(LABELS[:9])
        with pytest.raises(IdxParseError) as info:
            load_idx(path)
        assert str(path) in str(info.value)

    def test_files(self, tmp_path):
        images = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
        labels = np.array([3, 9])
        assert to_idx_bytes(labels) == b"\x00\x00\x08\x01" + (2).to_bytes(4, "big") + bytes([3, 9])
        assert_array_equal(load_idx(save_idx(labels, tmp_path / "labels")), labels)
        assert_allclose(load_idx(save_idx(images, tmp_path / "images")), images.reshape(2, 12) / 255.0)

    def test_writer_rejects_unsupported_arrays(self):
        with pytest.raises(DomainError):
            to_idx_bytes(np.zeros((2, 2)))
        with pytest.raises(DomainError):
            to_idx_bytes(np.array([256]))

    def test_mnist(self, tmp_path):
        images = save_idx(np.full((5, 2, 2), 51, dtype=np.uint8), tmp_path / "images")
        labels = save_idx(np.array([0, 1, 2, 3, 4]), tmp_path / "labels")
        dataset = load_mnist(images, labels, limit=3)
        assert len(dataset) == 3
        assert dataset.num_classes == 10
        assert dataset.feature_scale == {"kind": "divide", "factor": 255.0}
        assert_allclose(dataset.features, 0.2)

    def test_mnist_count_mismatch(self, tmp_path):
        images = save_idx(np.zeros((3, 2, 2), dtype=np.uint8), tmp_path / "images")
        labels = save_idx(np.array([0, 1]), tmp_path / "labels")
        with pytest.raises(DomainError):
            load_mnist(images, labels)


class TestPca:
    def test_recovers_axis_variances(self, rng):
        features = rng.standard_normal((20_000, 2)) * [2.0, 1.0]
        model = fit_pca(features, 2)
        assert_allclose(model.explained_variance, [4.0, 1.0], rtol=0.05)
        assert_allclose(np.abs(model.components), np.eye(2), atol=0.05)

    def test_full_rank_reconstruction(self, rng):
        features = rng.standard_normal((50, 4)) @ rng.standard_normal((4, 4))
        model = fit_pca(features, 4)
        assert_allclose(model.inverse_transform(transform(model, features)), features, atol=1e-8)

    def test_components(self, rng):
        features = rng.standard_normal((200, 5)) * [5.0, 4.0, 3.0, 2.0, 1.0]
        model = fit_pca(features, 3)
        assert model.k == 3
        assert_allclose(model.components @ model.components.T, np.eye(3), atol=1e-12)
        assert np.all(np.diff(model.explained_variance) <= 0)
        pivots = np.argmax(np.abs(model.components), axis=1)
        assert np.all(model.components[np.arange(3), pivots] > 0)

    def test_projection_statistics(self, rng):
        features = rng.standard_normal((300, 4)) @ rng.standard_normal((4, 4))
        model = fit_pca(features, 2)
        projected = transform(model, features)
        assert_allclose(projected.mean(axis=0), 0.0, atol=1e-10)
        assert_allclose(np.var(projected, axis=0, ddof=1), model.explained_variance, rtol=1e-8)
        assert_allclose(transform(model, model.mean), 0.0, atol=1e-12)

    def test_constant_column(self, rng):
        features = np.column_stack([rng.standard_normal(100), np.full(100, 3.0)])
        model = fit_pca(features, 2)
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)
        assert model.explained_variance[1] >= 0.0

    @pytest.mark.parametrize("k", [0, 4])
    def test_rejects_bad_rank(self, rng, k):
        with pytest.raises(DomainError):
            fit_pca(rng.standard_normal((10, 3)), k)

    def test_rejects_single_sample(self):
        with pytest.raises(DomainError):
            fit_pca(np.ones((1, 3)), 1)

    def test_transform_checks_width(self, rng):
        model = fit_pca(rng.standard_normal((10, 3)), 2)
        with pytest.raises(DomainError):
            transform(model, np.ones((2, 4)))

    def test_save_and_load(self, rng, tmp_path):
        model = fit_pca(rng.standard_normal((30, 3)), 2)
        loaded = PcaModel.load(model.save(tmp_path / "pca.json"))
        for original, restored in zip(model, loaded):
            assert_array_equal(original, restored)


class TestDatasets:
    def test_blobs_are_reproducible(self):
        first, second = synthetic_blobs(3, 10, 4, 2.0, seed=1), synthetic_blobs(3, 10, 4, 2.0, seed=1)
        assert_array_equal(first.features, second.features)
        assert not np.array_equal(first.features, synthetic_blobs(3, 10, 4, 2.0, seed=2).features)

    def test_blob_layout(self, blobs):
        assert len(blobs) == 60
        assert blobs.features.shape == (60, 2)
        assert np.bincount(blobs.labels).tolist() == [20, 20, 20]

    @pytest.mark.parametrize("dimension", [2, 5])
    def test_separated_centers(self, dimension):
        dataset = synthetic_blobs(3, 500, dimension, 10.0, seed=0)
        means = class_means(dataset)
        for a, b in itertools.combinations(means, 2):
            assert np.linalg.norm(a - b) == pytest.approx(10.0, abs=0.5)
        distances = np.linalg.norm(dataset.features[:, None, :] - means[None], axis=2)
        assert np.mean(np.argmin(distances, axis=1) == dataset.labels) >= 0.98

    def test_no_separation(self):
        means = class_means(synthetic_blobs(3, 500, 2, 0.0, seed=0))
        for a, b in itertools.combinations(means, 2):
            assert np.linalg.norm(a - b) < 0.5

    def test_invalid_blobs(self):
        with pytest.raises(DomainError):
            synthetic_blobs(1, 10, 2, 1.0)

    def test_dataset_validation(self):
        with pytest.raises(DomainError):
            Dataset.create(np.ones((3, 2)), [0, 1])
        with pytest.raises(DomainError):
            Dataset.create(np.ones((2, 2)), [0, 5], num_classes=3)

    def test_projected_csv(self, blobs, tmp_path):
        path = save_projected(blobs, tmp_path / "projected.csv", summary={"feature_scale": blobs.feature_scale})
        assert path.read_text().splitlines()[0] == "label,pc1,pc2"
        loaded = load_projected(path, blobs.num_classes)
        assert_array_equal(loaded.features, blobs.features)
        assert_array_equal(loaded.labels, blobs.labels)
