import warnings

import numpy as np
import pytest

from gradfeat.metrics import average_precision, mean_ap


def test_hand_cases():
    assert average_precision([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6, abs=1e-15)
    assert average_precision([0.3, 0.1, 0.2, 0.4], [1, 1, 1, 1]) == 1.0
    assert average_precision([0.9, 0.8, 0.7, 0.6, 0.5], [0, 0, 0, 0, 1]) == pytest.approx(0.2)


def test_eleven_point():
    # precision 1 up to recall 0.5 (6 points), 2/3 beyond (5 points)
    got = average_precision([0.9, 0.8, 0.7], [1, 0, 1], interpolated=True)
    assert got == pytest.approx(28 / 33, abs=1e-15)


def test_ties_go_to_lower_index():
    assert average_precision([0.5, 0.5], [0, 1]) == 0.5
    assert average_precision([0.5, 0.5], [1, 0]) == 1.0


def test_needs_a_relevant_item():
    with pytest.raises(ValueError):
        average_precision([0.1, 0.2], [0, 0])


def test_mean_ap_skips_empty_class():
    scores = np.array([[0.9, 0.1, 0.3], [0.2, 0.8, 0.1]])
    labels = np.array([[1, 0, 0], [0, 1, 0]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m, per_class = mean_ap(scores, labels)
    assert m == 1.0
    assert np.isnan(per_class[2])
    assert any("class 2" in str(w.message) for w in caught)


def test_mean_ap_shape_check():
    with pytest.raises(ValueError):
        mean_ap(np.zeros((2, 3)), np.zeros((2, 2)))
