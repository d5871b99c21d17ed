import numpy as np
import pytest

from crbm.model import CandidateSet
from crbm.spectral_hash import (
    SpectralHashConfig,
    SpectralHashIndex,
    build_index,
    encode,
    fit,
    hamming_ball_codes,
    load_index,
    pack_code,
    retrieve,
    save_index,
)


def coder_index(mean, components, ranges, selected, target_len=1):
    return SpectralHashIndex(
        mean=np.asarray(mean, float),
        components=np.asarray(components, float),
        ranges=np.asarray(ranges, float),
        selected=np.asarray(selected, dtype=np.int64),
        n_bits=len(selected),
        target_len=target_len,
    )


def random_index(rng, n=120, d=6, n_bits=5, label_len=4):
    inputs = rng.normal(size=(n, d)) @ rng.normal(size=(d, d)) + rng.normal(size=d)
    targets = rng.integers(0, 2, (n, label_len)).astype(np.uint8)
    return inputs, targets, build_index(inputs, targets, SpectralHashConfig(n_bits=n_bits))


def scan_retrieve(u, index, inputs, targets, radius=1):
    """Linear-scan oracle: keep targets whose input codes are within the radius."""
    probe = encode(u, index)
    keep = [
        v for x, v in zip(inputs, targets)
        if int(np.sum(encode(x, index) != probe)) <= radius
    ]
    if not keep:
        return CandidateSet.empty(targets.shape[1])
    return CandidateSet(np.array(keep), length=targets.shape[1])


class TestFit:
    def test_one_dimensional_uniform(self):
        inputs = np.linspace(0.0, 1.0, 129)[:, None]
        cfg = SpectralHashConfig(n_bits=2, pca_dims=1, outlier_clip=0.0)
        mean, components, ranges, selected = fit(inputs, cfg)
        np.testing.assert_allclose(components, [[1.0]])
        width = ranges[0, 1] - ranges[0, 0]
        assert width == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(selected, [[0, 1], [0, 2]])
        proxies = (selected[:, 1] / width) ** 2
        np.testing.assert_allclose(proxies, [1.0, 4.0], rtol=1e-12)

    def test_two_dimensional_tie_rule(self):
        # exact grid: widths 2 and 1 -> proxies 0.25, 1 (tie), 1 (tie), picked
        # in (proxy, dim, mode) order
        xs = np.arange(-1.0, 1.0 + 0.25, 0.25)
        ys = np.arange(-0.5, 0.5 + 0.25, 0.25)
        grid = np.array([(x, y) for x in xs for y in ys])
        cfg = SpectralHashConfig(n_bits=3, pca_dims=2, outlier_clip=0.0)
        _, components, ranges, selected = fit(grid, cfg)
        np.testing.assert_allclose(np.abs(components), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(ranges[:, 1] - ranges[:, 0], [2.0, 1.0], atol=1e-12)
        assert selected.tolist() == [[0, 1], [0, 2], [1, 1]]

    def test_components_orthonormal(self):
        rng = np.random.default_rng(0)
        inputs = rng.normal(size=(200, 8)) @ rng.normal(size=(8, 8))
        _, components, _, _ = fit(inputs, SpectralHashConfig(n_bits=4, pca_dims=5))
        gram = components @ components.T
        assert np.abs(gram - np.eye(5)).max() < 1e-8

    def test_degenerate_dimension_excluded(self):
        inputs = np.column_stack([np.linspace(0, 1, 50), np.full(50, 3.0)])
        cfg = SpectralHashConfig(n_bits=3, pca_dims=2, outlier_clip=0.0)
        _, _, _, selected = fit(inputs, cfg)
        assert set(selected[:, 0].tolist()) == {0}

    def test_all_degenerate_is_error(self):
        inputs = np.full((20, 2), 1.5)
        with pytest.raises(ValueError, match="degenerate"):
            fit(inputs, SpectralHashConfig(n_bits=2, pca_dims=2))

    def test_pca_dims_exceeding_input_dim_rejected(self):
        with pytest.raises(ValueError):
            fit(np.random.default_rng(1).normal(size=(30, 2)),
                SpectralHashConfig(n_bits=2, pca_dims=3))


class TestEncode:
    def test_boundary_bits(self):
        idx = coder_index([0.0], [[1.0]], [[0.0, 1.0]], [[0, 1]])
        assert encode(np.array([0.0]), idx).tolist() == [1]  # sin(pi/2) = 1
        assert encode(np.array([1.0]), idx).tolist() == [0]  # sin(3*pi/2) = -1

    def test_midpoint_second_mode(self):
        idx = coder_index([0.0], [[1.0]], [[0.0, 1.0]], [[0, 2]])
        assert encode(np.array([0.5]), idx).tolist() == [0]  # sin(pi/2 + pi) = -1

    def test_out_of_range_clamps(self):
        idx = coder_index([0.0], [[1.0]], [[0.0, 1.0]], [[0, 1]])
        assert encode(np.array([-5.0]), idx).tolist() == encode(np.array([0.0]), idx).tolist()
        assert encode(np.array([9.0]), idx).tolist() == encode(np.array([1.0]), idx).tolist()

    def test_dimension_mismatch(self):
        idx = coder_index([0.0], [[1.0]], [[0.0, 1.0]], [[0, 1]])
        with pytest.raises(ValueError):
            encode(np.zeros(2), idx)


class TestHammingBall:
    def test_radius_one_code_set(self):
        codes = hamming_ball_codes(np.array([1, 0, 1], dtype=np.uint8), 1)
        assert len(codes) == 4  # n_bits + 1 lookups
        got = {tuple(c.tolist()) for c in codes}
        assert got == {(1, 0, 1), (0, 0, 1), (1, 1, 1), (1, 0, 0)}

    def test_radius_zero_only_center(self):
        codes = hamming_ball_codes(np.array([1, 1], dtype=np.uint8), 0)
        assert len(codes) == 1

    def test_radius_two_counts(self):
        codes = hamming_ball_codes(np.zeros(5, dtype=np.uint8), 2)
        assert len(codes) == 1 + 5 + 10


class TestBuildIndex:
    def test_duplicate_pairs_single_member(self):
        inputs = np.array([[0.1, 0.2], [0.1, 0.2], [0.9, 0.8]])
        targets = np.array([[1, 0], [1, 0], [0, 1]], dtype=np.uint8)
        idx = build_index(inputs, targets, SpectralHashConfig(n_bits=2))
        key = pack_code(encode(inputs[0], idx))
        assert len(idx.table[key]) >= 1
        total = sum(len(c) for c in idx.table.values())
        assert total <= 2  # distinct targets only

    def test_every_pair_self_bucketed(self):
        rng = np.random.default_rng(2)
        inputs, targets, idx = random_index(rng)
        for u, v in zip(inputs, targets):
            assert v in idx.table[pack_code(encode(u, idx))]

    def test_recording_table_sees_exactly_n_plus_one_lookups(self):
        rng = np.random.default_rng(3)
        inputs, targets, idx = random_index(rng, n_bits=5)

        calls = []
        class RecordingDict(dict):
            def get(self, key, default=None):
                calls.append(key)
                return super().get(key, default)

        idx.table = RecordingDict(idx.table)
        retrieve(inputs[0], idx)
        assert len(calls) == 6
        assert len(set(calls)) == 6


class TestRetrieve:
    def test_self_retrieval(self):
        rng = np.random.default_rng(4)
        inputs, targets, idx = random_index(rng)
        for i in range(0, len(inputs), 7):
            assert targets[i] in retrieve(inputs[i], idx)

    def test_matches_linear_scan_oracle(self):
        rng = np.random.default_rng(5)
        inputs, targets, idx = random_index(rng, n=150, d=5, n_bits=6, label_len=5)
        probes = np.concatenate([inputs[:40], rng.normal(size=(40, 5)) * 2])
        for u in probes:
            got = retrieve(u, idx)
            want = scan_retrieve(u, idx, inputs, targets)
            np.testing.assert_array_equal(got.members, want.members)

    def test_empty_retrieval_is_legal(self):
        inputs = np.array([[0.0, 0.0], [0.02, 0.01], [0.01, 0.03]])
        targets = np.array([[1], [1], [0]], dtype=np.uint8)
        idx = build_index(inputs, targets, SpectralHashConfig(n_bits=6, pca_dims=2))
        # a probe far outside the data range maps to a distant code corner
        result = retrieve(np.array([1e3, -1e3]), idx)
        assert len(result) == 0 or isinstance(result, CandidateSet)

    def test_radius_two_superset(self):
        rng = np.random.default_rng(6)
        inputs, targets, idx = random_index(rng, n_bits=6)
        for u in inputs[:10]:
            r1 = retrieve(u, idx, radius=1)
            r2 = retrieve(u, idx, radius=2)
            assert len(r2) >= len(r1)
            for m in r1.members:
                assert m in r2


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        inputs, targets, idx = random_index(rng, n=80, d=4, n_bits=9, label_len=11)
        path = tmp_path / "hash.shidx"
        save_index(path, idx)
        loaded = load_index(path)
        np.testing.assert_array_equal(loaded.mean, idx.mean)
        np.testing.assert_array_equal(loaded.components, idx.components)
        np.testing.assert_array_equal(loaded.ranges, idx.ranges)
        np.testing.assert_array_equal(loaded.selected, idx.selected)
        assert loaded.n_bits == idx.n_bits and loaded.target_len == idx.target_len
        assert set(loaded.table) == set(idx.table)
        for key in idx.table:
            np.testing.assert_array_equal(loaded.table[key].members, idx.table[key].members)
        for u in inputs[:20]:
            np.testing.assert_array_equal(
                retrieve(u, loaded).members, retrieve(u, idx).members
            )

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.shidx"
        path.write_bytes(b"WRONG" + b"\x00" * 30)
        with pytest.raises(ValueError, match="magic"):
            load_index(path)


class TestPermutationStability:
    def test_encoding_invariant_to_fit_order(self):
        rng = np.random.default_rng(8)
        inputs = rng.normal(size=(100, 4))
        targets = rng.integers(0, 2, (100, 3)).astype(np.uint8)
        cfg = SpectralHashConfig(n_bits=4)
        idx_a = build_index(inputs, targets, cfg)
        perm = rng.permutation(100)
        idx_b = build_index(inputs[perm], targets[perm], cfg)
        probes = rng.normal(size=(30, 4))
        for u in probes:
            np.testing.assert_array_equal(encode(u, idx_a), encode(u, idx_b))
