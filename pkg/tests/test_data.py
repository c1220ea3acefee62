import math

import numpy as np
import pytest

from hte.data import (
    Dataset,
    Standardizer,
    counter3d_truth,
    default_scale,
    fit_standardizer,
    gen_counter3d,
    gen_sin16,
    load_csv,
    sin16_truth,
    split_dataset,
)
from hte.errors import ConfigError, DataError
from hte.rng import philox_generator


class TestDataset:
    def test_rejects_nonfinite(self):
        with pytest.raises(DataError):
            Dataset(np.array([[np.inf]]), np.array([1.0]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2)), np.zeros(2))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((0, 2)), np.zeros(0))


class TestLoadCsv:
    def test_header_and_named_target(self, tmp_path):
        path = tmp_path / "small.csv"
        path.write_text("a,b,t\n1,2,3\n4,5,6\n-1,0.5,2e-1\n")
        ds = load_csv(path, target="t")
        assert (ds.n, ds.d) == (3, 2)
        np.testing.assert_allclose(ds.y, [3.0, 6.0, 0.2])
        np.testing.assert_allclose(ds.X[2], [-1.0, 0.5])
        assert ds.feature_names == ["a", "b"]

    def test_nan_cell_is_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,t\n1,2\nNaN,4\n")
        with pytest.raises(DataError, match=r"row 3, column 1"):
            load_csv(path, target="t")

    def test_text_cell_is_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,t\n1,2\n3,oops\n")
        with pytest.raises(DataError, match=r"'oops' at row 3, column 2"):
            load_csv(path, target="t")

    def test_headerless_with_index_target(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("1,10,0.5\n2,20,0.25\n")
        ds = load_csv(path, target=1, has_header=False)
        np.testing.assert_array_equal(ds.y, [10.0, 20.0])
        np.testing.assert_array_equal(ds.X, [[1.0, 0.5], [2.0, 0.25]])
        assert ds.feature_names is None

    def test_missing_target_column(self, tmp_path):
        path = tmp_path / "small.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="'t' not found"):
            load_csv(path, target="t")

    def test_target_index_out_of_range(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("1,2\n")
        with pytest.raises(DataError, match="out of range"):
            load_csv(path, target=5, has_header=False)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(path, target=0, has_header=False)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,t\n1,2\n3\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv(path, target="t")

    def test_named_target_requires_header(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("1,2\n")
        with pytest.raises(ConfigError):
            load_csv(path, target="t", has_header=False)


class TestStandardizer:
    def test_columns_become_standard(self):
        X = philox_generator(1).normal(loc=3.0, scale=2.5, size=(200, 3))
        stz = Standardizer.fit(X)
        Z = stz.transform(X)
        np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(Z.std(axis=0, ddof=1), 1.0, atol=1e-10)

    def test_already_standard_column_unchanged(self):
        x = philox_generator(2).normal(size=500)
        x = (x - x.mean()) / x.std(ddof=1)
        stz = Standardizer.fit(x[:, None])
        np.testing.assert_allclose(stz.transform(x[:, None])[:, 0], x, atol=1e-10)

    def test_constant_column_passes_through(self):
        X = np.column_stack([np.full(10, 7.0), np.arange(10.0)])
        stz = Standardizer.fit(X)
        Z = stz.transform(X)
        np.testing.assert_array_equal(Z[:, 0], np.zeros(10))
        np.testing.assert_allclose(stz.inverse_transform(Z), X, atol=1e-12)

    def test_round_trip(self):
        X = philox_generator(3).normal(size=(100, 3)) * 40.0 + 5.0
        stz = Standardizer.fit(X)
        back = stz.inverse_transform(stz.transform(X))
        assert np.abs(back - X).max() <= 1e-12

    def test_target_round_trip(self):
        y = philox_generator(4).normal(size=50) * 3.0 - 1.0
        stz = Standardizer.fit(np.zeros((50, 1)), y)
        np.testing.assert_allclose(stz.inverse_target(stz.transform_target(y)), y,
                                   atol=1e-12)

    def test_fit_standardizer_helper(self):
        ds = gen_sin16(50, seed=0)
        stz = fit_standardizer(ds, scale_target=True)
        assert stz.scales_target
        assert not fit_standardizer(ds).scales_target


class TestDefaultScale:
    def test_sigma_is_root_mean_variance(self):
        rng = philox_generator(5)
        X = rng.normal(size=(5000, 2))
        X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)  # per-column variance 1
        h_hat, s_hat = default_scale(X)
        np.testing.assert_allclose(h_hat, 3.5 * 5000 ** (-0.25), rtol=1e-12)
        np.testing.assert_allclose(s_hat, 1.0 / h_hat, rtol=1e-15)

    def test_hand_worked_value(self):
        # n=8, d=1, unit sample variance: h = 3.5 * 8**(-1/3) = 1.75
        x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
        x = x / x.std(ddof=1)
        h_hat, _ = default_scale(x[:, None])
        np.testing.assert_allclose(h_hat, 1.75, rtol=1e-12)

    def test_scale_equivariance(self):
        X = philox_generator(6).normal(size=(60, 3))
        h1, _ = default_scale(X)
        h2, _ = default_scale(10.0 * X)
        np.testing.assert_allclose(h2, 10.0 * h1, rtol=1e-12)

    def test_identical_points_rejected(self):
        with pytest.raises(DataError):
            default_scale(np.ones((5, 2)))

    def test_single_point_rejected(self):
        with pytest.raises(DataError):
            default_scale(np.ones((1, 2)))


class TestGenerators:
    def test_sin16_truth_at_zero(self):
        assert sin16_truth(np.array([[0.0]]))[0] == 0.0

    def test_counter3d_truth_at_ones(self):
        value = counter3d_truth(np.array([[1.0, 1.0, 1.0]]))[0]
        np.testing.assert_allclose(value, 30.0 * math.sin(-1.0), rtol=1e-15)
        np.testing.assert_allclose(value, -25.2441, atol=1e-4)

    def test_seed_determinism(self):
        a = gen_sin16(100, seed=9)
        b = gen_sin16(100, seed=9)
        assert a.X.tobytes() == b.X.tobytes()
        assert a.y.tobytes() == b.y.tobytes()
        c = gen_counter3d(100, seed=9)
        d = gen_counter3d(100, seed=9)
        assert c.X.tobytes() == d.X.tobytes() and c.y.tobytes() == d.y.tobytes()

    def test_supports_and_noise_level(self):
        ds = gen_counter3d(20000, seed=1)
        assert ds.X.min() >= 0.0 and ds.X.max() < 1.0
        noise = ds.y - counter3d_truth(ds.X)
        assert abs(noise.std() - 0.1) < 0.005
        assert abs(noise.mean()) < 0.005


class TestSplit:
    def test_sizes(self):
        ds = gen_sin16(10, seed=0)
        train, test = split_dataset(ds, 0.7, seed=1)
        assert (train.n, test.n) == (7, 3)

    def test_union_is_original_multiset(self):
        ds = gen_sin16(101, seed=2)
        train, test = split_dataset(ds, 0.35, seed=3)
        merged = np.sort(np.concatenate([train.y, test.y]))
        np.testing.assert_array_equal(merged, np.sort(ds.y))

    def test_deterministic(self):
        ds = gen_sin16(50, seed=4)
        a1, b1 = split_dataset(ds, 0.5, seed=5)
        a2, b2 = split_dataset(ds, 0.5, seed=5)
        assert a1.X.tobytes() == a2.X.tobytes()
        assert b1.y.tobytes() == b2.y.tobytes()

    def test_disjoint_exhaustive_indices(self):
        ds = Dataset(np.arange(20.0)[:, None], np.arange(20.0))
        train, test = split_dataset(ds, 0.6, seed=6)
        seen = np.concatenate([train.y, test.y])
        assert sorted(seen.tolist()) == list(range(20))

    def test_rejects_degenerate_fraction(self):
        ds = gen_sin16(10, seed=7)
        with pytest.raises(ConfigError):
            split_dataset(ds, 1.0, seed=0)
        with pytest.raises(DataError):
            split_dataset(Dataset(np.zeros((1, 1)), np.zeros(1)), 0.5, seed=0)
