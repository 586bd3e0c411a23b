"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines are printed even under
capture) or ``python3 tests/test_acceptance.py`` for just the summary.
"""
import sys
import time

import numpy as np
import pytest

from stereodist import toys
from stereodist.adapt_sim import SimConfig, concentration_window, fit_decay_rate, random_multimodal_init
from stereodist.adapt_sim import simulate_batch, simulate_case_b, simulate_pixel
from stereodist.bench import BenchConfig, run_domain_shift
from stereodist.cli import gradcheck_rows
from stereodist.evaluation import error_stats
from stereodist.matcher import (
    SceneSpec,
    argmin_accuracy,
    census_cost_volume,
    generate_stereogram,
    interior_mask,
    sad_cost_volume,
)
from stereodist.objective import plain_softmax_jacobian
from stereodist.storage import kitti_png_read, kitti_png_write, pfm_read, pfm_write
from stereodist.storage import raw_volume_read, raw_volume_write
from stereodist.uncertainty import MetricKind, UncertaintyMetric, uncertainty_map
from stereodist.volume import anisotropic_softmax, hard_argmin, soft_argmin

# soft-argmin of the temperature toy vector, evaluated with 40-digit mpmath
TOY_SOFT_ARGMIN = {
    1: 13.453044142205972,
    2: 13.366076331551315,
    4: 11.823523878010137,
    8: 10.224392027924423,
    16: 10.002523250093347,
}


def report(number, title, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {number} {title}: {detail}"


def criterion_1():
    start = time.perf_counter()
    worst, where, pixel = 0.0, None, 0.0
    for label, t, rep in gradcheck_rows(n=100, length=32, seed=0, temperatures=(1.0, 4.0, 16.0)):
        pixel = max(pixel, rep.worst_pixel_rel_err)
        if rep.max_rel_err >= worst:
            worst, where = rep.max_rel_err, f"{label} t={t:g}"
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 2.0
    return ok, (f"worst relative error {worst:.2e} ({where}), {elapsed:.2f} s "
                f"[per-pixel diagnostic {pixel:.1e}]")


def _complex_step_jacobian(c, t, h=1e-30):
    """d softmax(-t c) / dc by complex-step differentiation (no subtractive cancellation)."""
    n = c.size
    jac = np.empty((n, n))
    shift = c.min()
    for j in range(n):
        z = (c - shift).astype(np.complex128)
        z[j] += 1j * h
        e = np.exp(-t * z)
        jac[:, j] = (e / e.sum()).imag / h
    return jac


def criterion_2():
    rng = np.random.default_rng(0)
    worst = 0.0
    for t in (1, 2, 4, 8, 16, 32):
        for c in rng.uniform(0, 3, (1000, 16)):
            p = anisotropic_softmax(c, t)
            err = np.abs(_complex_step_jacobian(c, t) - t * plain_softmax_jacobian(p)).max()
            worst = max(worst, err)
    return worst < 1e-12, f"max |J_t - t * J_plain(p_t)| = {worst:.2e} over 6000 vectors"


def criterion_3():
    c = toys.temperature_toy_costs()
    temps = (1, 2, 4, 8, 16)
    hard = hard_argmin(c)
    metrics = [UncertaintyMetric(k) for k in MetricKind]
    gaps, series = [], {m.kind.value: [] for m in metrics}
    for t in temps:
        p = anisotropic_softmax(c, t)
        d = float(soft_argmin(p))
        assert d == pytest.approx(TOY_SOFT_ARGMIN[t], rel=1e-12)
        gaps.append(abs(d - hard))
        for m in metrics:
            series[m.kind.value].append(float(uncertainty_map(p, m)))

    def strictly_down(xs):
        return all(b < a for a, b in zip(xs, xs[1:]))

    two = np.sort(c)[:2]
    margin = two[1] - two[0]
    limit = abs(float(soft_argmin(anisotropic_softmax(c, 64))) - hard)
    ok = all(strictly_down(v) for v in series.values()) and strictly_down(gaps) and margin >= 0.5 and limit < 1e-6
    detail = (f"|soft-hard| {' > '.join(f'{g:.3g}' for g in gaps)}; "
              + "; ".join(f"{k} {v[0]:.3g}->{v[-1]:.3g}" for k, v in series.items())
              + f"; t=64 gap {limit:.1e} (margin {margin:g})")
    return ok, detail


def criterion_4():
    rng = np.random.default_rng(2024)
    inits = [random_multimodal_init(rng) for _ in range(50)]
    cfg = SimConfig(t=1.0, lam=1.0, metric=UncertaintyMetric("entropy"), step_size=0.05, max_steps=2000)
    logs = simulate_batch(inits, cfg)
    monotone = all(all(b <= a for a, b in zip(log.loss, log.loss[1:])) for log in logs)
    peak = min(log.max_prob[-1] for log in logs)
    reached = [np.flatnonzero(np.asarray(log.max_prob) > 0.99) for log in logs]
    steps = max(int(r[0]) if r.size else 10**9 for r in reached)
    fits = [fit_decay_rate(log, concentration_window(log)) for log in logs]
    gamma = min(f.gamma for f in fits)
    r2 = min(f.r2 for f in fits)
    ok = monotone and peak > 0.99 and steps <= 2000 and gamma > 0 and r2 >= 0.8
    return ok, (f"50 inits: monotone={monotone}, min final max-prob {peak:.4f}, "
                f"slowest run passes 0.99 at step {steps}, min gamma {gamma:.3g}, min R^2 {r2:.3f}")


def criterion_5():
    entropy = UncertaintyMetric("entropy")
    c, gt = toys.case_init("fig5a", 16.0)
    a = simulate_pixel(c, SimConfig(t=16.0, gt=gt, metric=entropy))
    err_a = abs(a.disparity[-1] - gt)

    sharp = simulate_case_b(*toys.case_init("fig5b", 16.0), SimConfig(t=16.0, metric=entropy))
    plain = simulate_case_b(*toys.case_init("fig5b", 1.0), SimConfig(t=1.0, metric=entropy))
    s16, s1 = sharp.log.steps_to(0.5), plain.log.steps_to(0.5)
    faster = s16 is not None and (s1 is None or s16 < s1)
    ok = err_a < 0.1 and sharp.reached_gt and faster
    return ok, (f"case a |d-gt| {err_a:.1e}; case b t=16 argmax {sharp.log.final_argmax} (gt 6), "
                f"steps to |d-gt|<0.5: t=16 {s16} vs t=1 {s1}")


_BENCH = {}


def _bench():
    if not _BENCH:
        start = time.perf_counter()
        results, checks = run_domain_shift(BenchConfig())
        _BENCH.update(results=results, checks=checks, seconds=time.perf_counter() - start)
    return _BENCH


def criterion_6():
    b = _bench()
    means = b["results"]["means"]
    keys = ("msm", "entropy", "per")
    raised = all(means[f"noisy@t={t}"][k] > means[f"clean@t={t}"][k] for t in (1, 16) for k in keys)
    sharpened = all(means["noisy@t=16"][k] < means["noisy@t=1"][k] for k in keys)
    ok = raised and sharpened and b["seconds"] < 30
    detail = ", ".join(f"{k} {means['clean@t=16'][k]:.3f}->{means['noisy@t=16'][k]:.3f}" for k in keys)
    return ok, f"t=16 clean->noisy {detail}; t=16 below t=1 on noisy: {sharpened}; {b['seconds']:.2f} s"


def criterion_7():
    b = _bench()
    roc, pseudo = b["results"]["roc"], b["results"]["pseudo"]
    oracle = roc["oracle"].d1_all
    monotone = all(y <= x + 1e-12 for x, y in zip(oracle, oracle[1:]))
    halves = {k: (roc[k].at(1.0), roc[k].at(0.5)) for k in ("msm", "entropy", "per")}
    sparsify = all(half <= full for full, half in halves.values())
    kept = all(v["d1_retained"] <= v["d1_dense"] for v in pseudo.values())
    detail = "; ".join(f"{k} D1 {f:.1f}%->{h:.1f}% (pseudo {pseudo[k]['d1_retained']:.1f}%)"
                       for k, (f, h) in halves.items())
    return monotone and sparsify and kept, f"oracle monotone={monotone}; {detail}"


def criterion_8():
    gt = np.array([[10.0, 10.0, 80.0, 80.0], [5.0, 5.0, 50.0, 0.0]])
    pred = np.array([[13.5, 10.9, 84.5, 83.0], [1.0, 6.5, 57.0, 9.0]])
    mask = np.array([[True, True, True, True], [True, True, True, False]])
    s = error_stats(pred, gt, mask)
    counts_ok = s.d1_all == 100 * 4 / 7 and s.bad_1 == 100 * 6 / 7

    rng = np.random.default_rng(8)
    m = (rng.standard_normal((37, 53)) * 100).astype(np.float32)
    pfm_ok = pfm_read(pfm_write(m)).tobytes() == m.tobytes()
    vol = rng.standard_normal((9, 11, 33))
    vol_ok = all(raw_volume_read(raw_volume_write(vol, "d", o)).tobytes() == vol.tobytes() for o in "<>")
    disp = rng.uniform(0.01, 255.9, (37, 53))
    back, valid = kitti_png_read(kitti_png_write(disp))
    png_err = float(np.abs(back - disp).max())
    ok = counts_ok and pfm_ok and vol_ok and valid.all() and png_err <= 1 / 512
    return ok, (f"D1 {s.d1_all:.4f}% bad-1 {s.bad_1:.4f}% (hand 4/7, 6/7); PFM bitwise {pfm_ok}; "
                f"volume bitwise {vol_ok}; PNG16 max err {png_err:.2e} <= {1 / 512:.2e}")


def criterion_9():
    spec = SceneSpec()
    pair, gt, mask = generate_stereogram(spec)
    inner = interior_mask(mask, 9)
    acc = {name: argmin_accuracy(f(pair, 32, 9)[0], gt, inner)
           for name, f in (("sad", sad_cost_volume), ("census", census_cost_volume))}
    noisy = SceneSpec(noise_sigma=20, seed=5)
    v1 = census_cost_volume(generate_stereogram(noisy)[0], 32, 9)[0]
    v2 = census_cost_volume(generate_stereogram(noisy)[0], 32, 9)[0]
    same = v1.tobytes() == v2.tobytes()
    ok = min(acc.values()) >= 0.99 and same
    return ok, f"interior accuracy sad {acc['sad']:.4f}, census {acc['census']:.4f}; seeded volumes bitwise equal {same}"


CRITERIA = [
    (1, "gradient correctness", criterion_1),
    (2, "temperature-scaled Jacobian identity", criterion_2),
    (3, "temperature sweep on the toy vector", criterion_3),
    (4, "entropy-flow convergence", criterion_4),
    (5, "wrong-peak and multimodal corrections", criterion_5),
    (6, "clean vs noisy uncertainty", criterion_6),
    (7, "sparsification and pseudo-labels", criterion_7),
    (8, "metrics and codecs", criterion_8),
    (9, "matcher sanity", criterion_9),
]


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"criterion_{n}" for n, *_ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, detail = check()
    line = report(number, title, ok, detail)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for number, title, check in CRITERIA:
        ok, detail = check()
        print(report(number, title, ok, detail))
        failed += not ok
    sys.exit(1 if failed else 0)
