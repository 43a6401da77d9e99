import numpy as np
import pytest
from hypothesis import given, strategies as st

from batchscreen.errors import UndefinedMetricError
from batchscreen.metrics import (
    LOG_IR_FLOOR,
    average_rank,
    immediate_regret,
    log10_regret,
    mean_and_se,
    read_metrics_csv,
    recall_above_threshold,
    recall_top_fraction,
    top_fraction_set,
    write_metrics_csv,
)


def test_regret_is_plain_difference():
    assert immediate_regret(1.5, 0.25) == 1.25


def test_regret_clamps_rounding_noise():
    assert immediate_regret(1.0 - 1e-14, 1.0) == 0.0


def test_regret_rejects_true_undercut():
    # best below the reference minimum means the reference is wrong
    with pytest.raises(ValueError):
        immediate_regret(0.5, 1.0)


def test_log_regret_floor():
    out = log10_regret([0.0, 1e-12, 1.0])
    assert out[0] == np.log10(LOG_IR_FLOOR)
    assert out[1] == np.log10(LOG_IR_FLOOR)
    assert out[2] == 0.0


def test_top_fraction_rounds_up():
    targets = np.arange(10, dtype=float)
    assert top_fraction_set(targets, "maximize", 0.25) == {7, 8, 9}
    # ceil(0.01 * 10) = 1
    assert top_fraction_set(targets, "maximize", 0.01) == {9}
    assert top_fraction_set(targets, "minimize", 0.2) == {0, 1}


def test_top_fraction_cutoff_tie_prefers_lowest_index():
    targets = np.array([5.0, 3.0, 5.0, 3.0, 1.0])
    # two candidates tie at the m=3 cutoff value 3.0; index 1 wins
    assert top_fraction_set(targets, "maximize", 0.6) == {0, 2, 1}


def test_recall_top_fraction_counts_overlap():
    targets = np.array([0.0, 10.0, 5.0, 8.0])
    # top half = {1, 3}
    assert recall_top_fraction({1, 0}, targets, "maximize", 0.5) == 0.5
    assert recall_top_fraction({1, 3}, targets, "maximize", 0.5) == 1.0
    assert recall_top_fraction(set(), targets, "maximize", 0.5) == 0.0


def test_recall_threshold_strictly_above():
    targets = np.array([1.0, 2.0, 3.0])
    assert recall_above_threshold({2}, targets, 2.0) == 1.0  # only 3.0 > 2.0
    with pytest.raises(UndefinedMetricError):
        recall_above_threshold({0}, targets, 99.0)


def test_average_rank_with_ties():
    scores = np.array([
        [0.9, 0.5, 0.5],
        [0.2, 0.8, 0.1],
    ])
    mean, se = average_rank(scores, higher_better=True)
    np.testing.assert_allclose(mean, [1.5, 1.75, 2.75])
    # column 0 ranks are (1, 2): sd 0.7071.., se = sd / sqrt(2) = 0.5
    assert se[0] == pytest.approx(0.5)


def test_average_rank_lower_better():
    scores = np.array([[1.0, 2.0, 3.0]])
    mean, se = average_rank(scores, higher_better=False)
    np.testing.assert_array_equal(mean, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(se, 0.0)


def test_mean_and_se():
    mean, se = mean_and_se([1.0, 3.0])
    assert mean == 2.0
    assert se == pytest.approx(np.std([1.0, 3.0], ddof=1) / np.sqrt(2))
    assert mean_and_se([4.0]) == (4.0, 0.0)
    with pytest.raises(ValueError):
        mean_and_se([])


def test_metrics_csv_round_trip(tmp_path):
    rows = [
        {"method": "pdts", "seed": 7, "iteration": 1, "evals": 10,
         "metric_name": "ir", "value": 0.25},
        {"method": "random", "seed": 7, "iteration": 2, "evals": 20,
         "metric_name": "ir", "value": 0.125},
    ]
    path = str(tmp_path / "m.csv")
    write_metrics_csv(path, rows)
    with open(path, encoding="utf-8") as fh:
        assert fh.readline().strip() == "method,seed,iteration,evals,metric_name,value"
    assert read_metrics_csv(path) == rows


def test_metrics_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_metrics_csv(str(path))


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.floats(0.01, 1.0))
def test_top_fraction_size_is_ceil(targets, fraction):
    targets = np.asarray(targets)
    got = top_fraction_set(targets, "maximize", fraction)
    assert len(got) == int(np.ceil(fraction * targets.size))


@given(
    st.integers(2, 8).flatmap(
        lambda m: st.lists(
            st.lists(st.floats(-100, 100), min_size=m, max_size=m),
            min_size=1, max_size=10,
        )
    )
)
def test_average_ranks_stay_in_range(score_rows):
    scores = np.asarray(score_rows)
    mean, se = average_rank(scores)
    m = scores.shape[1]
    assert np.all(mean >= 1.0) and np.all(mean <= m)
    assert np.all(se >= 0.0)
    # tied or not, ranks within a repetition always sum to m(m+1)/2
    assert np.allclose(mean.sum(), m * (m + 1) / 2.0)
