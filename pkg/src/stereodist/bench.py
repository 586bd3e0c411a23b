"""Clean-vs-noisy stereogram benchmark.

One scene geometry is rendered twice, without noise ("source") and with
Gaussian noise on the right image ("target").  Both are matched with the
same classical matcher and read out at temperature 1 and at a sharpened
temperature.  The checks are directional: noise should raise every
uncertainty measure, sharpening should lower them, and ranking pixels by
uncertainty should make sparsified maps and pseudo-labels more accurate.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import error_stats, roc_sparsification
from .matcher import MATCHERS, SceneSpec, generate_stereogram
from .pseudo_label import make_pseudo_label
from .uncertainty import MetricKind, UncertaintyMetric, uncertainty_map
from .volume import readout

METRICS = tuple(UncertaintyMetric(k) for k in MetricKind)


@dataclass(frozen=True)
class BenchConfig:
    scene: SceneSpec = field(default_factory=SceneSpec)
    noise_sigma: float = 20.0
    matcher: str = "census"
    window: int = 9
    temperatures: tuple = (1.0, 16.0)
    roc_step: float = 0.05
    delta: float = 20.0
    per_s: float = 0.5


@dataclass
class Readout:
    probs: np.ndarray
    disparity: np.ndarray
    maps: dict


def run_matcher(pair, d_max, matcher="census", window=9):
    return MATCHERS[matcher](pair, d_max, window)


def read_all(costs, t, per_s=0.5) -> Readout:
    p, d = readout(costs, t)
    maps = {m.kind.value: uncertainty_map(p, replace(m, per_s=per_s)) for m in METRICS}
    return Readout(p, d, maps)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def run_domain_shift(cfg: BenchConfig = BenchConfig()):
    """Return ``(results dict, list of Check)``."""
    spec = cfg.scene
    clean_spec = replace(spec, noise_sigma=0.0)
    noisy_spec = replace(spec, noise_sigma=cfg.noise_sigma)
    pair_c, gt, mask = generate_stereogram(clean_spec)
    pair_n, gt_n, mask_n = generate_stereogram(noisy_spec)
    vol_c, _ = run_matcher(pair_c, spec.d_max, cfg.matcher, cfg.window)
    vol_n, _ = run_matcher(pair_n, spec.d_max, cfg.matcher, cfg.window)

    results = {"means": {}, "error": {}, "roc": {}, "pseudo": {}}
    reads = {}
    for domain, vol in (("clean", vol_c), ("noisy", vol_n)):
        for t in cfg.temperatures:
            r = read_all(vol, t, cfg.per_s)
            reads[domain, t] = r
            results["means"][f"{domain}@t={t:g}"] = {k: float(v[mask].mean()) for k, v in r.maps.items()}
            results["error"][f"{domain}@t={t:g}"] = error_stats(r.disparity, gt, mask).__dict__

    checks = []
    metric_names = [m.kind.value for m in METRICS]
    for t in cfg.temperatures:
        mc, mn = results["means"][f"clean@t={t:g}"], results["means"][f"noisy@t={t:g}"]
        ok = all(mn[k] > mc[k] for k in metric_names)
        detail = ", ".join(f"{k} {mc[k]:.4g} -> {mn[k]:.4g}" for k in metric_names)
        checks.append(Check(f"noise raises mean uncertainty (t={t:g})", ok, detail))
    t_lo, t_hi = min(cfg.temperatures), max(cfg.temperatures)
    lo, hi = results["means"][f"noisy@t={t_lo:g}"], results["means"][f"noisy@t={t_hi:g}"]
    checks.append(Check(
        f"t={t_hi:g} lowers noisy mean uncertainty vs t={t_lo:g}",
        all(hi[k] < lo[k] for k in metric_names),
        ", ".join(f"{k} {lo[k]:.4g} -> {hi[k]:.4g}" for k in metric_names),
    ))

    # sparsification and pseudo-labels on the sharpened noisy readout
    r = reads["noisy", t_hi]
    dense = error_stats(r.disparity, gt, mask).d1_all
    oracle = roc_sparsification(r.disparity, gt, mask, np.abs(r.disparity - gt), cfg.roc_step)
    results["roc"]["oracle"] = oracle
    checks.append(Check(
        "oracle-uncertainty sparsification curve is non-increasing",
        bool(np.all(np.diff(oracle.d1_all) <= 1e-12)),
        f"D1 {oracle.d1_all[0]:.3f}% at density 1 -> {oracle.at(0.5):.3f}% at 0.5",
    ))
    for name, u in r.maps.items():
        curve = roc_sparsification(r.disparity, gt, mask, u, cfg.roc_step)
        results["roc"][name] = curve
        checks.append(Check(
            f"{name}: D1 at density 0.5 <= D1 at density 1.0",
            curve.at(0.5) <= curve.at(1.0),
            f"{curve.at(1.0):.3f}% -> {curve.at(0.5):.3f}%",
        ))
        # pseudo-labels only see pixels a trainer would: the whole image
        pl = make_pseudo_label(r.disparity, u, cfg.delta)
        keep = pl.validity & mask
        kept_d1 = error_stats(r.disparity, gt, keep).d1_all
        results["pseudo"][name] = {
            "threshold": pl.threshold_value,
            "valid_fraction": pl.valid_fraction,
            "d1_retained": kept_d1,
            "d1_dense": dense,
        }
        checks.append(Check(
            f"{name}: pseudo-label (delta={cfg.delta:g}) retained D1 <= dense D1",
            kept_d1 <= dense,
            f"{dense:.3f}% -> {kept_d1:.3f}% with {pl.valid_fraction:.3f} kept",
        ))
    return results, checks
