import math

import numpy as np
import pytest

from hte.errors import ConfigError
from hte.rng import philox_generator
from hte.transform import (
    HistogramTransform,
    apply_transform,
    bin_key,
    cell_volume,
    sample_rotation,
    sample_stretch,
    sample_transform,
)


def _identity_transform(d=1, b=None):
    return HistogramTransform(
        rotation=np.eye(d),
        scales=np.ones(d),
        translation=np.zeros(d) if b is None else np.asarray(b, dtype=float),
        h_lower=1.0,
        h_upper=1.0,
    )


class TestSampleRotation:
    def test_d1_is_the_only_so1_element(self):
        r = sample_rotation(1, philox_generator(0))
        assert r.shape == (1, 1)
        assert r[0, 0] == 1.0

    def test_orthonormal_unit_determinant(self):
        for seed in range(50):
            r = sample_rotation(3, philox_generator(seed))
            assert np.abs(r.T @ r - np.eye(3)).max() <= 1e-10
            assert abs(np.linalg.det(r) - 1.0) <= 1e-10

    @pytest.mark.parametrize("d", range(1, 9))
    def test_all_dimensions(self, d):
        for seed in range(20):
            r = sample_rotation(d, philox_generator(seed, d))
            assert np.abs(r.T @ r - np.eye(d)).max() <= 1e-10
            assert abs(np.linalg.det(r) - 1.0) <= 1e-10

    def test_deterministic_for_fixed_seed(self):
        a = sample_rotation(2, philox_generator(42))
        b = sample_rotation(2, philox_generator(42))
        assert a.tobytes() == b.tobytes()

    def test_haar_moments(self):
        # first moment 0 and second moment 1/d per entry
        d = 3
        samples = np.stack(
            [sample_rotation(d, philox_generator(seed, 123)) for seed in range(2000)]
        )
        assert np.abs(samples.mean(axis=0)).max() <= 4.0 / math.sqrt(2000)
        assert np.abs((samples**2).mean(axis=0) - 1.0 / d).max() <= 0.05

    def test_rejects_bad_dimension(self):
        with pytest.raises(ConfigError):
            sample_rotation(0, philox_generator(0))


class TestSampleTransform:
    def test_degenerate_interval_gives_exact_scale(self):
        t = sample_transform(3, 0.5, 0.5, philox_generator(1))
        assert np.all(t.scales == 2.0)

    def test_widths_stay_inside_the_window(self):
        h_hat = 0.7
        for seed in range(200):
            t = sample_transform(2, h_hat / math.e, h_hat, philox_generator(seed))
            widths = 1.0 / t.scales
            assert np.all(widths >= h_hat / math.e * (1 - 1e-12))
            assert np.all(widths <= h_hat * (1 + 1e-12))

    def test_log_uniform_law_monte_carlo(self):
        # h in [0.1, 1.0] puts log(s) uniform on [0, log 10]
        rng = philox_generator(2024)
        draws = np.concatenate(
            [np.log(sample_stretch(2, 0.1, 1.0, rng)[0]) for _ in range(5000)]
        )
        expected_mean = math.log(10.0) / 2.0
        stderr = (math.log(10.0) / math.sqrt(12.0)) / math.sqrt(draws.size)
        assert abs(draws.mean() - expected_mean) <= 3.0 * stderr

    def test_translation_in_unit_interval(self):
        for seed in range(100):
            t = sample_transform(4, 0.2, 0.9, philox_generator(seed, 9))
            assert np.all(t.translation >= 0.0)
            assert np.all(t.translation < 1.0)

    def test_deterministic_for_fixed_seed(self):
        a = sample_transform(3, 0.1, 1.0, philox_generator(7))
        b = sample_transform(3, 0.1, 1.0, philox_generator(7))
        assert a.rotation.tobytes() == b.rotation.tobytes()
        assert a.scales.tobytes() == b.scales.tobytes()
        assert a.translation.tobytes() == b.translation.tobytes()

    def test_rejects_bad_width_bounds(self):
        with pytest.raises(ConfigError):
            sample_transform(2, 0.0, 1.0, philox_generator(0))
        with pytest.raises(ConfigError):
            sample_transform(2, 2.0, 1.0, philox_generator(0))


class TestValidation:
    def test_rejects_non_orthogonal_rotation(self):
        with pytest.raises(ConfigError):
            HistogramTransform(
                rotation=np.array([[1.0, 0.1], [0.0, 1.0]]),
                scales=np.ones(2),
                translation=np.zeros(2),
                h_lower=1.0,
                h_upper=1.0,
            )

    def test_rejects_reflection(self):
        with pytest.raises(ConfigError):
            HistogramTransform(
                rotation=np.diag([1.0, -1.0]),
                scales=np.ones(2),
                translation=np.zeros(2),
                h_lower=1.0,
                h_upper=1.0,
            )

    def test_rejects_translation_outside_unit_box(self):
        with pytest.raises(ConfigError):
            _identity_transform(b=[1.0])


class TestApply:
    def test_identity(self):
        t = HistogramTransform(np.eye(2), np.ones(2), np.zeros(2), 1.0, 1.0)
        np.testing.assert_array_equal(
            apply_transform(t, np.array([0.3, -0.7])), [0.3, -0.7]
        )

    def test_hand_worked_rotation_stretch_translation(self):
        # S x = (2, 0); R (S x) = (0, 2); + b = (0.5, 2.5)
        t = HistogramTransform(
            rotation=np.array([[0.0, -1.0], [1.0, 0.0]]),
            scales=np.array([2.0, 2.0]),
            translation=np.array([0.5, 0.5]),
            h_lower=0.5,
            h_upper=0.5,
        )
        np.testing.assert_allclose(
            apply_transform(t, np.array([1.0, 0.0])), [0.5, 2.5], rtol=0, atol=0
        )

    def test_pure_translation_1d(self):
        t = _identity_transform(b=[0.25])
        np.testing.assert_array_equal(apply_transform(t, np.array([0.0])), [0.25])

    def test_batch_matches_single_bitwise(self):
        t = sample_transform(3, 0.2, 0.8, philox_generator(5))
        X = philox_generator(6).normal(size=(40, 3))
        batch = apply_transform(t, X)
        for i in range(len(X)):
            assert apply_transform(t, X[i]).tobytes() == batch[i].tobytes()

    def test_dimension_mismatch(self):
        t = _identity_transform(d=2)
        with pytest.raises(ConfigError):
            apply_transform(t, np.array([1.0, 2.0, 3.0]))


class TestBinKey:
    def test_floor_of_transformed_point(self):
        t = HistogramTransform(
            rotation=np.array([[0.0, -1.0], [1.0, 0.0]]),
            scales=np.array([2.0, 2.0]),
            translation=np.array([0.5, 0.5]),
            h_lower=0.5,
            h_upper=0.5,
        )
        np.testing.assert_array_equal(bin_key(t, np.array([1.0, 0.0])), [0, 2])

    def test_floor_rounds_toward_minus_infinity(self):
        t = _identity_transform(b=[0.5])
        np.testing.assert_array_equal(bin_key(t, np.array([-0.7])), [-1])

    def test_same_unit_bin(self):
        t = _identity_transform(b=[0.1])
        assert bin_key(t, np.array([0.0]))[0] == bin_key(t, np.array([0.8]))[0] == 0

    def test_key_equality_matches_floor_equality(self):
        t = sample_transform(2, 0.3, 1.0, philox_generator(13))
        rng = philox_generator(14)
        X = rng.normal(size=(500, 2))
        Y = rng.normal(size=(500, 2))
        keys_x = bin_key(t, X)
        keys_y = bin_key(t, Y)
        floors_x = np.floor(apply_transform(t, X))
        floors_y = np.floor(apply_transform(t, Y))
        same_key = (keys_x == keys_y).all(axis=1)
        same_floor = (floors_x == floors_y).all(axis=1)
        np.testing.assert_array_equal(same_key, same_floor)


class TestCellVolume:
    def test_product_formula(self):
        t = HistogramTransform(
            np.eye(2), np.array([2.0, 4.0]), np.zeros(2), 0.25, 0.5
        )
        assert cell_volume(t) == 0.125

    def test_identity_scaling(self):
        assert cell_volume(_identity_transform(d=4)) == 1.0

    def test_matches_determinant_oracle(self):
        for seed in range(30):
            t = sample_transform(3, 0.2, 0.9, philox_generator(seed, 77))
            det = np.linalg.det(t.rotation @ np.diag(t.scales))
            np.testing.assert_allclose(cell_volume(t), 1.0 / det, rtol=1e-12)
