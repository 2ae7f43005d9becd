import math

import pytest

import vfuse


def test_average_precision_example():
    assert vfuse.average_precision([True, False, True, False]) == pytest.approx((1 + 2 / 3) / 2)


def test_evaluate_ties_by_id():
    report = vfuse.evaluate(["b", "a"], [1.0, 1.0], [True, False])
    assert report["ap"] == pytest.approx(0.5)
    assert report["num_positives"] == 1


def test_degenerate_labels():
    with pytest.raises(vfuse.DegenerateLabelsError):
        vfuse.evaluate(["a", "b"], [1.0, 2.0], [False, False])


def test_smoothing_truncates_at_edges():
    assert vfuse.smooth([0.0, 3.0, 0.0], 3) == pytest.approx([1.5, 1.0, 1.5])
    assert vfuse.video_score([0.0, 3.0, 0.0], 3) == pytest.approx(1.5)


def test_learned_fusion_finds_perfect_column():
    labels = [i % 5 == 0 for i in range(40)]
    rows = [[10.0 if y else -10.0, math.sin(i)] for i, y in enumerate(labels)]
    weights, ap = vfuse.learn_weights(rows, labels)
    assert ap == 1.0
    assert len(weights) == 2


def test_bow_histogram_sums_to_one():
    h = vfuse.encode_bow([[0.0, 0.0], [1.0, 1.0], [0.9, 1.1]], [[0.0, 0.0], [1.0, 1.0]])
    assert h == pytest.approx([1 / 3, 2 / 3])


def test_presets_listed():
    assert {"matched-v1", "divergent-v1", "imbalanced-v1"} <= set(vfuse.preset_names())


def test_bad_config_raises():
    with pytest.raises(vfuse.ConfigError):
        vfuse.experiment({"window": 4})
