import os

import numpy as np
import pytest

from crbm.data import (
    FoldSpec,
    ImagePairDataset,
    MultiLabelDataset,
    binarize,
    corrupt_flip,
    corrupt_occlude,
    fold_indices,
    load_idx_images,
    load_idx_labels,
    load_multilabel,
    make_folds,
    save_idx_images,
    save_multilabel,
)


class TestMultiLabelFormat:
    def test_small_file(self, tmp_path):
        path = tmp_path / "ml.txt"
        path.write_text("3 2\n0.5 -1 2.25 | 1 0\n0 0 0 | 0 1\n")
        ds = load_multilabel(path)
        assert len(ds) == 2 and ds.n_features == 3 and ds.n_labels == 2
        np.testing.assert_allclose(ds.inputs[0], [0.5, -1.0, 2.25])
        np.testing.assert_array_equal(ds.targets, [[1, 0], [0, 1]])

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_multilabel(path)

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 1\n1.0 2.0 | 1\n1.0 | 0\n")
        with pytest.raises(ValueError, match="line 3"):
            load_multilabel(path)

    def test_bad_label_value(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 1\n1.0 | 2\n")
        with pytest.raises(ValueError, match="line 2"):
            load_multilabel(path)

    def test_missing_separator(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 1\n1.0 0.5 1\n")
        with pytest.raises(ValueError, match="separator|tokens"):
            load_multilabel(path)

    def test_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = MultiLabelDataset(rng.normal(size=(17, 5)) * 1e3, rng.integers(0, 2, (17, 4)))
        path = tmp_path / "rt.txt"
        save_multilabel(path, ds)
        back = load_multilabel(path)
        np.testing.assert_array_equal(back.inputs, ds.inputs)
        np.testing.assert_array_equal(back.targets, ds.targets)


class TestIdxFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        imgs = rng.integers(0, 256, (5, 12)).astype(np.float64) / 255.0
        path = tmp_path / "imgs.idx"
        save_idx_images(path, imgs, 3, 4)
        back, rows, cols = load_idx_images(path)
        assert (rows, cols) == (3, 4)
        np.testing.assert_allclose(back, imgs)

    def test_zero_images(self, tmp_path):
        path = tmp_path / "empty.idx"
        save_idx_images(path, np.zeros((0, 6)), 2, 3)
        back, rows, cols = load_idx_images(path)
        assert back.shape == (0, 6)

    def test_extreme_bytes_scale(self, tmp_path):
        path = tmp_path / "scale.idx"
        import struct
        path.write_bytes(struct.pack(">IIII", 0x00000803, 1, 1, 2) + bytes([255, 0]))
        back, _, _ = load_idx_images(path)
        np.testing.assert_array_equal(back[0], [1.0, 0.0])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(b"\x00\x00\x08\x04" + b"\x00" * 12)
        with pytest.raises(ValueError, match="magic"):
            load_idx_images(path)

    def test_truncation(self, tmp_path):
        import struct
        path = tmp_path / "trunc.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + b"\x00" * 5)
        with pytest.raises(ValueError, match="bytes"):
            load_idx_images(path)

    def test_labels_round_trip(self, tmp_path):
        import struct
        path = tmp_path / "labels.idx"
        path.write_bytes(struct.pack(">II", 0x00000801, 4) + bytes([3, 1, 4, 1]))
        np.testing.assert_array_equal(load_idx_labels(path), [3, 1, 4, 1])

    @pytest.mark.skipif("CRBM_MNIST_DIR" not in os.environ, reason="real MNIST not present")
    def test_official_mnist_train_file(self):
        path = os.path.join(os.environ["CRBM_MNIST_DIR"], "train-images-idx3-ubyte")
        imgs, rows, cols = load_idx_images(path)
        assert imgs.shape == (60000, 784) and rows == cols == 28


class TestBinarize:
    def test_half_is_zero_strict(self):
        np.testing.assert_array_equal(binarize(np.array([[0.5, 0.51, 0.0]])), [[0, 1, 0]])

    def test_all_zero(self):
        assert binarize(np.zeros((2, 4))).sum() == 0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            binarize(np.array([[1.2]]))


class TestCorruptFlip:
    def test_rate_zero_identity(self):
        v = np.array([1, 0, 1, 1], dtype=np.uint8)
        u = corrupt_flip(v, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(u, v.astype(float))

    def test_exact_flip_count(self):
        v = np.zeros(784, dtype=np.uint8)
        for i in range(20):
            u = corrupt_flip(v, 0.1, np.random.default_rng(i))
            assert int((u != v).sum()) == 78

    def test_input_untouched(self):
        v = np.ones(50, dtype=np.uint8)
        before = v.copy()
        corrupt_flip(v, 0.5, np.random.default_rng(3))
        np.testing.assert_array_equal(v, before)

    def test_position_uniformity(self):
        v = np.zeros(784, dtype=np.uint8)
        rng = np.random.default_rng(4)
        n_draws = 10_000
        counts = np.zeros(784)
        for _ in range(n_draws):
            counts += corrupt_flip(v, 0.1, rng)  # flipped zeros read as ones
        p = 78 / 784
        sigma = np.sqrt(p * (1 - p) / n_draws)
        assert np.all(np.abs(counts / n_draws - p) < 5 * sigma)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            corrupt_flip(np.zeros(4, dtype=np.uint8), 1.5, np.random.default_rng(0))


class TestCorruptOcclude:
    def test_all_zero_unchanged(self):
        v = np.zeros(28 * 28, dtype=np.uint8)
        u = corrupt_occlude(v, 8, 28, 28, np.random.default_rng(0))
        assert u.sum() == 0

    def test_all_ones_is_square_block(self):
        v = np.ones(28 * 28, dtype=np.uint8)
        u = corrupt_occlude(v, 8, 28, 28, np.random.default_rng(1))
        assert int((u == 0).sum()) == 64
        zero_rows, zero_cols = np.nonzero(u.reshape(28, 28) == 0)
        assert zero_rows.max() - zero_rows.min() == 7
        assert zero_cols.max() - zero_cols.min() == 7

    def test_only_one_to_zero_changes(self):
        rng = np.random.default_rng(2)
        v = rng.integers(0, 2, 28 * 28).astype(np.uint8)
        u = corrupt_occlude(v, 8, 28, 28, np.random.default_rng(3))
        changed = u != v
        assert np.all(v[changed] == 1) and np.all(u[changed] == 0)

    def test_corner_distribution_uniform(self):
        from scipy.stats import chisquare
        v = np.ones(28 * 28, dtype=np.uint8)
        rng = np.random.default_rng(5)
        counts = np.zeros((21, 21))
        for _ in range(100_000):
            u = corrupt_occlude(v, 8, 28, 28, rng)
            rows, cols = np.nonzero(u.reshape(28, 28) == 0)
            counts[rows.min(), cols.min()] += 1
        stat, pvalue = chisquare(counts.reshape(-1))
        assert pvalue > 0.001

    def test_image_too_small(self):
        with pytest.raises(ValueError, match="too small"):
            corrupt_occlude(np.zeros(16, dtype=np.uint8), 8, 4, 4, np.random.default_rng(0))


class TestFolds:
    def test_exact_split_sizes(self):
        train, valid, test = fold_indices(FoldSpec(fold=0, seed=1), 100)
        assert (len(train), len(valid), len(test)) == (80, 10, 10)

    def test_remainder_goes_to_train(self):
        train, valid, test = fold_indices(FoldSpec(fold=0, seed=1), 107)
        assert (len(train), len(valid), len(test)) == (87, 10, 10)

    def test_disjoint_covering(self):
        train, valid, test = fold_indices(FoldSpec(fold=3, seed=9), 53)
        combined = np.sort(np.concatenate([train, valid, test]))
        np.testing.assert_array_equal(combined, np.arange(53))

    def test_reproducible(self):
        ds = MultiLabelDataset(np.zeros((40, 2)), np.zeros((40, 3), dtype=np.uint8))
        folds_a = make_folds(ds, n_folds=4, seed=7)
        folds_b = make_folds(ds, n_folds=4, seed=7)
        for (a1, a2, a3), (b1, b2, b3) in zip(folds_a, folds_b):
            np.testing.assert_array_equal(a1, b1)
            np.testing.assert_array_equal(a2, b2)
            np.testing.assert_array_equal(a3, b3)

    def test_folds_differ_from_each_other(self):
        ds = MultiLabelDataset(np.zeros((40, 2)), np.zeros((40, 3), dtype=np.uint8))
        folds = make_folds(ds, n_folds=3, seed=7)
        assert not np.array_equal(folds[0][0], folds[1][0])

    def test_too_small_rejected(self):
        ds = MultiLabelDataset(np.zeros((5, 2)), np.zeros((5, 3), dtype=np.uint8))
        with pytest.raises(ValueError, match="too small"):
            make_folds(ds, n_folds=10, seed=0)

    def test_subset_slices_both_dataset_kinds(self):
        ml = MultiLabelDataset(np.arange(20).reshape(10, 2), np.zeros((10, 2), dtype=np.uint8))
        sub = ml.subset(np.array([1, 3]))
        np.testing.assert_array_equal(sub.inputs, [[2, 3], [6, 7]])
        pairs = ImagePairDataset(np.zeros((10, 4)), np.zeros((10, 4), dtype=np.uint8), 2, 2)
        assert len(pairs.subset(np.array([0, 2, 4]))) == 3
