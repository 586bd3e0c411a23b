import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereodist import toys
from stereodist.adapt_sim import (
    SimConfig,
    concentration_window,
    costs_from_probs,
    fit_decay_rate,
    random_multimodal_init,
    simulate_batch,
    simulate_case_b,
    simulate_pixel,
)
from stereodist.errors import DegenerateInputError, DivergenceError, InputValidationError
from stereodist.uncertainty import UncertaintyMetric
from stereodist.volume import anisotropic_softmax

ENTROPY = UncertaintyMetric("entropy")


def pure_entropy(t=1.0, **kw):
    return SimConfig(t=t, lam=1.0, metric=ENTROPY, **kw)


def test_dirac_is_stationary():
    c = np.full(16, 1000.0)
    c[5] = 0
    log = simulate_pixel(c, SimConfig(gt=5.0, metric=ENTROPY))
    assert log.loss[0] == 0
    assert len(set(log.loss)) == 1 and len(set(log.disparity)) == 1


def test_bimodal_collapses_onto_an_initial_mode():
    c, _ = toys.case_init("bimodal", 4.0)
    log = simulate_pixel(c, pure_entropy(4.0))
    assert log.max_prob[-1] > 0.99
    assert log.final_argmax in (8, 23)


def test_case_a_converges_to_gt():
    c, gt = toys.case_init("fig5a", 16.0)
    log = simulate_pixel(c, SimConfig(t=16.0, gt=gt, metric=ENTROPY))
    assert abs(log.disparity[-1] - gt) < 0.1


def test_case_b_reaches_gt_and_beats_plain_softmax():
    sharp = simulate_case_b(*toys.case_init("fig5b", 16.0), SimConfig(t=16.0, metric=ENTROPY))
    assert sharp.reached_gt and sharp.log.final_argmax == 6
    plain = simulate_case_b(*toys.case_init("fig5b", 1.0), SimConfig(t=1.0, lam=0.0, metric=ENTROPY))
    s16, s1 = sharp.log.steps_to(0.5), plain.log.steps_to(0.5)
    assert s16 is not None
    assert s1 is None or s16 < s1


def test_gt_at_existing_peak_converges_fast():
    p = toys.wrong_peak_probs()
    log = simulate_case_b(costs_from_probs(p, 16.0), 14.0, SimConfig(t=16.0, metric=ENTROPY)).log
    assert log.steps_to(0.5) <= 5


def test_line_search_keeps_loss_monotone():
    rng = np.random.default_rng(4)
    for _ in range(5):
        log = simulate_pixel(random_multimodal_init(rng), SimConfig(t=4.0, gt=float(rng.uniform(0, 31)), step_size=1.0))
        assert all(b <= a for a, b in zip(log.loss, log.loss[1:]))


def test_fixed_step_mode_never_shrinks_the_step():
    c, gt = toys.case_init("fig5b", 1.0)
    log = simulate_pixel(c, SimConfig(t=1.0, gt=gt, step_size=0.3, line_search=False, max_steps=50))
    assert set(log.step_size[1:]) == {0.3}


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_step():
    c, gt = toys.case_init("fig5a", 1.0)
    with pytest.raises(DivergenceError) as err:
        simulate_pixel(c, SimConfig(t=1.0, gt=gt, step_size=1e308, line_search=False, max_steps=5))
    assert err.value.step >= 1


def test_gt_range_checked():
    with pytest.raises(InputValidationError):
        simulate_pixel(np.zeros(4), SimConfig(gt=3.5))


def test_exponential_fit():
    k = np.arange(30)
    fit = fit_decay_rate(2.0 * np.exp(-0.3 * k))
    assert fit.gamma == pytest.approx(0.3, rel=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    flat = fit_decay_rate(np.full(10, 0.7))
    assert flat.gamma == 0 and flat.r2 == 1
    with pytest.raises(DegenerateInputError):
        fit_decay_rate(np.ones(5), (3, 4))


def test_uniform_start_decays_exponentially():
    c, _ = toys.case_init("uniform", 4.0)
    log = simulate_pixel(c, pure_entropy(4.0))
    fit = fit_decay_rate(log, concentration_window(log))
    assert fit.gamma > 0 and fit.r2 >= 0.8


def test_entropy_flow_ends_near_dirac():
    rng = np.random.default_rng(11)
    for log in simulate_batch([random_multimodal_init(rng) for _ in range(5)], pure_entropy(), workers=2):
        assert all(b <= a for a, b in zip(log.entropy, log.entropy[1:]))
        assert log.loss[-1] < 1e-4 or log.max_prob[-1] > 0.99


def test_batch_threads_match_serial(monkeypatch):
    rng = np.random.default_rng(0)
    inits = [random_multimodal_init(rng) for _ in range(4)]
    cfg = pure_entropy(max_steps=100)
    serial = simulate_batch(inits, cfg, workers=1)
    monkeypatch.setenv("STEREODIST_THREADS", "3")
    threaded = simulate_batch(inits, cfg)
    assert [a.loss for a in serial] == [b.loss for b in threaded]


def test_costs_from_probs_inverts_softmax():
    p = toys.wrong_peak_probs()
    for t in (1.0, 16.0):
        np.testing.assert_allclose(anisotropic_softmax(costs_from_probs(p, t), t), p, rtol=1e-12)


def test_unknown_case():
    with pytest.raises(KeyError, match="fig5a"):
        toys.case_init("fig9", 1.0)


def test_csv_columns():
    log = simulate_pixel(toys.case_init("fig5a", 16.0)[0], SimConfig(gt=10.0, max_steps=3))
    lines = log.to_csv().splitlines()
    assert lines[0] == "step,loss,entropy,max_prob,disparity"
    assert len(lines) == len(log) + 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 4.0, 16.0]))
def test_probabilities_stay_normalized(seed, t):
    rng = np.random.default_rng(seed)
    cfg = SimConfig(t=t, gt=float(rng.uniform(0, 31)), max_steps=40)
    log = simulate_pixel(random_multimodal_init(rng, t=t), cfg)
    assert np.all(np.isfinite(log.final_cost))
    assert abs(anisotropic_softmax(log.final_cost, t).sum() - 1) < 1e-12
    assert all(0 <= h <= math.log(32) + 1e-12 for h in log.entropy)
