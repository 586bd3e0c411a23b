import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stereodist.bench import read_all, run_matcher
from stereodist.errors import InputValidationError, StructuralError
from stereodist.evaluation import error_stats
from stereodist.matcher import SceneSpec, generate_stereogram
from stereodist.pseudo_label import make_pseudo_label, nearest_rank_percentile

maps = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.floats(0, 1))
deltas = st.floats(0.5, 99.5)


def test_quarter_drop():
    pl = make_pseudo_label(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.1, 0.9, 0.5, 0.2]), 25)
    assert pl.validity.tolist() == [True, False, True, True]
    assert pl.disparity.tolist() == [1.0, 0.0, 3.0, 4.0]
    assert pl.threshold_value == 0.5


def test_constant_uncertainty_keeps_everything():
    for delta in (1, 20, 99):
        assert make_pseudo_label(np.ones((4, 5)), np.full((4, 5), 0.3), delta).validity.all()


@pytest.mark.parametrize("delta", [0, 100, -5, 150])
def test_delta_out_of_range(delta):
    with pytest.raises(InputValidationError):
        make_pseudo_label(np.ones(4), np.ones(4), delta)


def test_shape_mismatch():
    with pytest.raises(StructuralError):
        make_pseudo_label(np.ones(4), np.ones(5))


def test_nearest_rank():
    assert nearest_rank_percentile([15, 20, 35, 40, 50], 40) == 20
    assert nearest_rank_percentile([15, 20, 35, 40, 50], 100) == 50
    assert nearest_rank_percentile([3.0], 1) == 3.0


def test_twenty_percent_drop_with_distinct_values():
    u = np.random.default_rng(0).permutation(1000).reshape(25, 40) / 1000.0
    pl = make_pseudo_label(np.zeros_like(u), u, 20)
    assert abs(pl.validity.sum() - 800) <= 1


@pytest.mark.parametrize("metric", ["msm", "entropy", "per"])
def test_retained_pixels_are_more_accurate(metric):
    pair, gt, mask = generate_stereogram(SceneSpec(noise_sigma=20))
    r = read_all(run_matcher(pair, 32)[0], 16.0)
    pl = make_pseudo_label(r.disparity, r.maps[metric], 20)
    dense = error_stats(r.disparity, gt, mask).d1_all
    kept = error_stats(r.disparity, gt, mask & pl.validity).d1_all
    assert kept <= dense


@given(maps, deltas, deltas)
def test_larger_delta_keeps_a_subset(u, a, b):
    lo, hi = sorted((a, b))
    v_lo = make_pseudo_label(np.ones_like(u), u, lo).validity
    v_hi = make_pseudo_label(np.ones_like(u), u, hi).validity
    assert np.all(v_hi <= v_lo)


@given(maps, deltas)
def test_invalid_set_is_exactly_above_threshold(u, delta):
    disp = np.full(u.shape, 7.0)
    pl = make_pseudo_label(disp, u, delta)
    assert np.array_equal(~pl.validity, u > pl.threshold_value)
    assert np.all(pl.disparity[~pl.validity] == 0)
    assert np.all(pl.disparity[pl.validity] == 7.0)


@given(arrays(np.float64, 60, elements=st.floats(0, 40), unique=True))
def test_oracle_ranking_never_hurts(pred):
    gt = np.full(60, 20.0)
    err = np.abs(pred - gt)
    prev = None
    for delta in (5, 20, 50, 80, 95):
        keep = make_pseudo_label(pred, err, delta).validity
        d1 = error_stats(pred, gt, keep).d1_all
        assert prev is None or d1 <= prev
        prev = d1
