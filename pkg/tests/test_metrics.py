from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agrichain.errors import ShapeMismatchError
from agrichain.field import FrequencyTable
from agrichain.metrics import accuracy, centralized_classify, mse, write_scores_csv


def test_mse_examples():
    assert mse([1, 2, 3], [1, 2, 3]) == 0
    assert mse([1, 2, 3, 4], [2, 1, 4, 5]) == 1.0
    assert mse([1, 3, 5], [1, 5, 5]) == pytest.approx(4 / 3)


def test_accuracy_examples():
    assert accuracy([1, 2], [1, 2]) == 100
    assert accuracy([1, 2], [2, 1]) == 0
    assert accuracy([3] * 40, [3] * 36 + [4] * 4) == pytest.approx(90)


def test_argument_checks():
    with pytest.raises(ShapeMismatchError):
        mse([1, 2], [1])
    with pytest.raises(ShapeMismatchError):
        accuracy([1], [1, 2])
    with pytest.raises(ValueError):
        mse([0], [1])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_centralized_classify():
    counts = np.array([[100, 0, 50], [0, 0, 50], [0, 40, 0], [0, 60, 0], [0, 0, 0]])
    assert centralized_classify(FrequencyTable(counts)).tolist() == [1, 4, 1]


def test_scores_csv(tmp_path):
    write_scores_csv(tmp_path / "s.csv", [(1, "bc-iont", 0.0, 100.0)])
    assert (tmp_path / "s.csv").read_text().splitlines() == ["round,method,mse,accuracy", "1,bc-iont,0.0,100.0"]


codes = st.lists(st.integers(1, 5), min_size=1, max_size=50)


@settings(max_examples=100, deadline=None)
@given(codes, st.data())
def test_accuracy_100_iff_mse_0(actual, data):
    predicted = data.draw(st.lists(st.integers(1, 5), min_size=len(actual), max_size=len(actual)))
    assert (accuracy(actual, predicted) == 100) == (mse(actual, predicted) == 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(0, 100), min_size=5, max_size=5), min_size=1, max_size=8),
       st.integers(1, 20))
def test_centralized_scale_invariance(columns, scale):
    counts = np.array(columns).T
    assert (centralized_classify(FrequencyTable(counts)).tolist()
            == centralized_classify(FrequencyTable(counts * scale)).tolist())
