import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedids.dataset import Dataset
from fedids.errors import InputError
from fedids.preprocess import fit_scaler, one_hot, split, transform
from fedids.rng import RngStream


def plain_dataset(n, features=None, seed=0):
    if features is None:
        features = RngStream(seed).generator().normal(size=(n, 3))
    labels = np.arange(n) % 2
    return Dataset([f"f{i}" for i in range(features.shape[1])], features, labels)


class TestScaler:
    def test_endpoints(self):
        col = np.array([[0.0], [10.0], [23.0]])
        scaler = fit_scaler(col)
        out = transform(scaler, col)
        assert np.allclose(out[:, 0], [0.0, 10.0 / 23.0, 1.0])

    def test_constant_column_maps_to_zero(self):
        col = np.array([[7.0], [7.0], [7.0]])
        out = transform(fit_scaler(col), col)
        assert (out == 0.0).all()
        # and stays zero for unseen values on that column
        assert (transform(fit_scaler(col), np.array([[9.0]])) == 0.0).all()

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            fit_scaler(np.array([[np.inf], [1.0]]))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_monotone_and_unit_range(self, seed):
        x = RngStream(seed).generator().normal(0, 5, size=(12, 4))
        scaler = fit_scaler(x)
        out = transform(scaler, x)
        assert out.min() >= 0.0 and out.max() <= 1.0
        for col in range(4):
            order = np.argsort(x[:, col])
            assert (np.diff(out[order, col]) >= 0).all()
        assert np.allclose(out.min(axis=0), 0.0)
        assert np.allclose(out.max(axis=0), 1.0)


class TestSplit:
    def test_sizes_small(self):
        parts = split(plain_dataset(10), 0.10, seed=123)
        assert len(parts.test) == 1 and len(parts.train) == 9

    def test_sizes_reference_row_count(self):
        # ceil(0.10 * 23793) = 2380 test rows, 21413 training rows
        data = plain_dataset(23793, features=np.zeros((23793, 1)))
        parts = split(data, 0.10, seed=123)
        assert len(parts.test) == 2380
        assert len(parts.train) == 21413

    def test_deterministic(self):
        a = split(plain_dataset(50, seed=1), 0.2, seed=9)
        b = split(plain_dataset(50, seed=1), 0.2, seed=9)
        assert np.array_equal(a.permutation, b.permutation)
        assert np.array_equal(a.train.features, b.train.features)

    def test_permutation_reconstructs_split(self):
        data = plain_dataset(37, seed=2)
        parts = split(data, 0.25, seed=4)
        reordered = data.take(parts.permutation)
        stacked = np.vstack([parts.train.features, parts.test.features])
        assert np.array_equal(reordered.features, stacked)
        relabeled = np.concatenate([parts.train.labels, parts.test.labels])
        assert np.array_equal(reordered.labels, relabeled)

    def test_too_small_rejected(self):
        with pytest.raises(InputError):
            split(plain_dataset(1), 0.5, seed=0)

    def test_bad_fraction_rejected(self):
        with pytest.raises(InputError):
            split(plain_dataset(10), 0.0, seed=0)
        with pytest.raises(InputError):
            split(plain_dataset(10), 1.0, seed=0)


class TestOneHot:
    def test_examples(self):
        assert one_hot([0]).tolist() == [[1.0, 0.0]]
        assert one_hot([1, 0, 1]).tolist() == [[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]

    def test_out_of_range_rejected(self):
        with pytest.raises(InputError):
            one_hot([0, 2])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=1), min_size=1, max_size=64))
    def test_argmax_round_trip(self, labels):
        matrix = one_hot(labels)
        assert np.argmax(matrix, axis=1).tolist() == labels
