import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedids import nn
from fedids.dataset import Dataset
from fedids.errors import InputError, StateError
from fedids.metrics import ConfusionMatrix, confusion, evaluate, scores
from fedids.preprocess import fit_scaler
from fedids.rng import RngStream

label_vectors = st.lists(
    st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200
)


class TestConfusion:
    def test_hand_enumeration(self):
        cm = confusion([1, 1, 0, 0], [1, 0, 0, 1])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (1, 1, 1, 1)

    def test_perfect_predictions(self):
        cm = confusion([1, 0, 1], [1, 0, 1])
        assert cm.fp == 0 and cm.fn == 0

    def test_all_missed_positives(self):
        cm = confusion([0] * 5, [1] * 5)
        assert cm.fn == 5 and cm.tp == 0 and cm.fp == 0 and cm.tn == 0

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            confusion([0, 1], [0])

    def test_non_binary_rejected(self):
        with pytest.raises(InputError):
            confusion([0, 2], [0, 1])


class TestScores:
    def test_perfect(self):
        sc = scores(confusion([1, 0, 1, 0], [1, 0, 1, 0]))
        assert (sc.accuracy, sc.precision, sc.recall, sc.f1) == (1.0, 1.0, 1.0, 1.0)
        assert not sc.undefined

    def test_weighted_hand_computation(self):
        # pred [0,0,0,1], true [0,0,1,1]: weighted precision 5/6, recall = accuracy = 3/4
        sc = scores(confusion([0, 0, 0, 1], [0, 0, 1, 1]))
        assert abs(sc.precision - 5.0 / 6.0) < 1e-15
        assert sc.recall == 0.75
        assert sc.accuracy == 0.75

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            scores(ConfusionMatrix(0, 0, 0, 0))

    def test_undefined_scores_flagged(self):
        # nothing predicted positive: class-1 precision has a zero denominator
        sc = scores(confusion([0, 0, 0], [1, 1, 0]))
        assert sc.undefined
        assert 0.0 <= sc.precision <= 1.0

    @settings(max_examples=200, deadline=None)
    @given(label_vectors)
    def test_weighted_recall_equals_accuracy_exactly(self, pairs):
        pred = [p for p, _ in pairs]
        true = [t for _, t in pairs]
        sc = scores(confusion(pred, true))
        assert sc.recall == sc.accuracy
        for value in (sc.accuracy, sc.precision, sc.recall, sc.f1):
            assert 0.0 <= value <= 1.0

    @settings(max_examples=200, deadline=None)
    @given(label_vectors)
    def test_f1_bounded_by_precision_recall(self, pairs):
        pred = [p for p, _ in pairs]
        true = [t for _, t in pairs]
        sc = scores(confusion(pred, true))
        assert sc.f1 <= max(sc.precision, sc.recall) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(label_vectors)
    def test_class_swap_keeps_accuracy(self, pairs):
        pred = np.array([p for p, _ in pairs])
        true = np.array([t for _, t in pairs])
        direct = scores(confusion(pred, true))
        swapped = scores(confusion(1 - pred, 1 - true))
        assert direct.accuracy == swapped.accuracy


class TestEvaluate:
    def balanced_test_set(self, n=20):
        gen = RngStream(0).generator()
        features = gen.normal(size=(n, 6))
        labels = np.arange(n) % 2
        return Dataset([f"f{i}" for i in range(6)], features, labels)

    def test_zero_weight_model_on_balanced_set(self):
        data = self.balanced_test_set()
        params = nn.init_params(
            (
                nn.LayerSpec(6, 6, "relu", 0.0),
                nn.LayerSpec(6, 4, "relu", 0.0),
                nn.LayerSpec(4, 2, "softmax", 0.0),
            ),
            RngStream(1),
        )
        for w in params.weights:
            w[:] = 0.0
        result = evaluate(params, fit_scaler(data.features), data)
        assert result.test_accuracy == 0.5
        assert abs(result.test_loss - math.log(2.0)) < 1e-12

    def test_empty_test_rejected(self):
        data = self.balanced_test_set()
        empty = data.take(np.array([], dtype=int))
        params = nn.init_params(nn.default_layer_specs(), RngStream(1))
        with pytest.raises(InputError):
            evaluate(params, fit_scaler(data.features), empty)

    def test_missing_scaler_rejected(self):
        data = self.balanced_test_set()
        params = nn.init_params(nn.default_layer_specs(), RngStream(1))
        with pytest.raises(StateError):
            evaluate(params, None, data)

    def test_confident_single_row(self):
        data = self.balanced_test_set(n=2).take(np.array([1]))
        params = nn.init_params(nn.default_layer_specs(), RngStream(1))
        for w in params.weights:
            w[:] = 0.0
        params.biases[-1][:] = (-40.0, 40.0)  # label 1 with certainty
        result = evaluate(params, fit_scaler(data.features), data)
        assert result.test_accuracy == 1.0
        assert result.test_loss < 1e-6  # pinned at the clamp floor
