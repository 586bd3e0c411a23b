"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import storage, toys
from .adapt_sim import SimConfig, concentration_window, fit_decay_rate, simulate_pixel
from .bench import BenchConfig, read_all, run_domain_shift, run_matcher
from .errors import DegenerateInputError, StereoDistError
from .evaluation import error_stats, roc_sparsification
from .matcher import MATCHERS, SceneSpec, StereoPair, generate_stereogram
from .objective import DEFAULT_LAMBDA, FD_STEP, LOSSES, finite_difference_check, sample_checkable_costs
from .pseudo_label import DEFAULT_DELTA, make_pseudo_label
from .uncertainty import MetricKind, UncertaintyMetric, to_gray8

GRAD_TOL = 1e-6


class UsageError(Exception):
    pass


def _write(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        path.write_text(data)
    else:
        path.write_bytes(data)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {p}")
    return p


def _metric(args) -> UncertaintyMetric:
    return UncertaintyMetric(MetricKind(args.metric), args.s)


# -- estimate ------------------------------------------------------------------

def cmd_estimate(args) -> int:
    gt = gt_mask = None
    if args.scene:
        spec = SceneSpec.from_json(_existing(args.scene).read_text())
        pair, gt, gt_mask = generate_stereogram(spec)
        vol, mask = run_matcher(pair, args.d_max or spec.d_max, args.matcher, args.window)
    elif args.volume:
        vol = storage.raw_volume_read(_existing(args.volume).read_bytes())
        mask = np.ones(vol.shape[:2], dtype=bool)
    elif args.left and args.right:
        pair = StereoPair(storage.read_gray8(_existing(args.left)), storage.read_gray8(_existing(args.right)))
        vol, mask = run_matcher(pair, args.d_max or 32, args.matcher, args.window)
    else:
        raise UsageError("estimate needs --scene, --volume, or both --left and --right")

    out = Path(args.out)
    r = read_all(vol, args.t, args.s)
    means_mask = gt_mask if gt_mask is not None else mask
    _write(out / "disparity.pfm", storage.pfm_write(r.disparity.astype(np.float32)))
    _write(out / "disparity.png", storage.kitti_png_write(r.disparity, mask))
    for name, u in r.maps.items():
        _write(out / f"uncertainty_{name}.pfm", storage.pfm_write(u.astype(np.float32)))
    chosen = r.maps[args.metric]
    _write(out / f"uncertainty_{args.metric}.png", storage.gray8_png_write(to_gray8(chosen)))
    if args.save_volume:
        _write(out / "volume.cvol", storage.raw_volume_write(vol))

    summary = {
        "t": args.t,
        "metric": args.metric,
        "per_s": args.s,
        "shape": list(vol.shape),
        "n_pixels_averaged": int(means_mask.sum()),
        "mean_uncertainty": {k: float(v[means_mask].mean()) for k, v in r.maps.items()},
    }
    if gt is not None:
        summary["error"] = error_stats(r.disparity, gt, gt_mask).__dict__
        _write(out / "gt.pfm", storage.pfm_write(gt.astype(np.float32)))
        _write(out / "gt.png", storage.kitti_png_write(gt, gt_mask))
    _write(out / "summary.json", _dump(summary))
    print(_dump(summary), end="")
    return 0


# -- scene ---------------------------------------------------------------------

def cmd_scene(args) -> int:
    spec = SceneSpec.from_json(_existing(args.config).read_text()) if args.config else SceneSpec()
    overrides = {k: v for k, v in (("noise_sigma", args.noise), ("seed", args.seed)) if v is not None}
    spec = replace(spec, **overrides)
    pair, gt, mask = generate_stereogram(spec)
    out = Path(args.out)
    _write(out / "left.pgm", storage.pgm_write(pair.left))
    _write(out / "right.pgm", storage.pgm_write(pair.right))
    _write(out / "gt.png", storage.kitti_png_write(gt, mask))
    _write(out / "gt.pfm", storage.pfm_write(gt.astype(np.float32)))
    _write(out / "scene.json", spec.to_json() + "\n")
    return 0


# -- gradcheck -----------------------------------------------------------------

def gradcheck_rows(n=100, length=32, seed=0, h=FD_STEP, temperatures=(1.0, 4.0, 16.0), registry=None):
    """Yield ``(loss label, t, FDReport)`` over every loss / metric / temperature."""
    registry = registry or LOSSES
    rng = np.random.default_rng(seed)
    for t in temperatures:
        costs, gt = sample_checkable_costs(rng, n, length, t, h)
        base = {"t": t, "gt": gt, "s": 0.5}
        yield "smooth_l1", t, finite_difference_check(costs, "smooth_l1", base, h, registry)
        for kind in MetricKind:
            yield kind.value, t, finite_difference_check(costs, kind.value, base, h, registry)
        for kind in MetricKind:
            params = {**base, "metric": kind.value, "lam": DEFAULT_LAMBDA[kind]}
            yield f"combined[{kind.value}]", t, finite_difference_check(costs, "combined", params, h, registry)


def cmd_gradcheck(args, registry=None) -> int:
    worst = 0.0
    # rel_err is normwise over the gradient volume; the per-pixel column is a diagnostic
    print(f"{'loss':<20} {'t':>5} {'max_abs_err':>12} {'max_rel_err':>12} {'pixel_rel':>12}")
    for label, t, rep in gradcheck_rows(args.n, args.length, args.seed, args.h, registry=registry):
        worst = max(worst, rep.max_rel_err)
        flag = "" if rep.ok(GRAD_TOL) else "  <-- FAIL"
        print(f"{label:<20} {t:>5g} {rep.max_abs_err:>12.3e} {rep.max_rel_err:>12.3e} "
              f"{rep.worst_pixel_rel_err:>12.3e}{flag}")
    if args.sweep:
        print("\nstep sweep (worst relative error over all losses):")
        sweep = {}
        for h in (1e-4, 1e-5, 1e-6):
            rows = gradcheck_rows(args.n, args.length, args.seed, h, registry=registry)
            sweep[h] = max(r.max_rel_err for *_, r in rows)
            print(f"  h={h:.0e}  {sweep[h]:.3e}")
        print(f"  smallest at h={min(sweep, key=sweep.get):.0e}")
    ok = worst < GRAD_TOL
    print(f"\n{'PASS' if ok else 'FAIL'}: worst relative error {worst:.3e} (tolerance {GRAD_TOL:g})")
    return 0 if ok else 1


# -- adapt-sim -----------------------------------------------------------------

CASE_DEFAULTS = {
    # pure entropy flow only depends on step * t^2; t=4 keeps the concentration phase resolvable
    "bimodal": {"t": 4.0, "lam": 1.0, "metric": "entropy"},
    "uniform": {"t": 4.0, "lam": 1.0, "metric": "entropy"},
    "fig5a": {"t": 16.0, "lam": None, "metric": "entropy"},
    "fig5b": {"t": 16.0, "lam": None, "metric": "entropy"},
    "custom": {"t": 16.0, "lam": None, "metric": "entropy"},
}


def cmd_adapt_sim(args) -> int:
    case = args.case or "custom"
    d = CASE_DEFAULTS[case]
    t = args.t if args.t is not None else d["t"]
    metric = UncertaintyMetric(MetricKind(args.metric or d["metric"]), args.s)
    lam = args.lam if args.lam is not None else d["lam"]
    if args.cost:
        try:
            init = np.array([float(v) for v in args.cost.split(",")])
        except ValueError:
            raise UsageError(f"--cost must be a comma-separated list of numbers, got {args.cost!r}") from None
        gt = args.gt
    else:
        init, gt = toys.case_init(case, t)
        if args.gt is not None:
            gt = args.gt
    cfg = SimConfig(t=t, lam=lam, metric=metric, step_size=args.step_size, max_steps=args.max_steps,
                    line_search=not args.no_line_search, gt=gt)
    log = simulate_pixel(init, cfg)
    try:
        fit = fit_decay_rate(log, concentration_window(log))
        log.gamma, log.r2 = fit.gamma, fit.r2
        window = list(fit.window)
    except DegenerateInputError:
        window = None
    summary = {"case": case, "t": t, "lambda": cfg.lam, "metric": metric.kind.value,
               "step_size": cfg.step_size, "line_search": cfg.line_search,
               "concentration_window": window, **log.summary()}
    out = Path(args.out)
    _write(out / "trajectory.csv", log.to_csv())
    _write(out / "summary.json", _dump(summary))
    print(_dump(summary), end="")
    return 0


# -- roc / pseudo / metrics ------------------------------------------------------

def _pred_gt(args):
    pred = storage.read_map(_existing(args.pred))
    gt, mask = storage.read_disparity(_existing(args.gt))
    if pred.shape != gt.shape:
        raise UsageError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    return pred, gt, mask


def cmd_roc(args) -> int:
    pred, gt, mask = _pred_gt(args)
    unc = storage.read_map(_existing(args.unc))
    curve = roc_sparsification(pred, gt, mask, unc, args.step)
    if args.out:
        _write(Path(args.out), curve.to_csv())
        _write(Path(args.out).with_suffix(".json"), curve.to_json() + "\n")
    else:
        print(curve.to_csv(), end="")
    return 0


def cmd_pseudo(args) -> int:
    if not 0 < args.delta < 100:
        raise UsageError(f"--delta must lie strictly between 0 and 100, got {args.delta}")
    pred = storage.read_map(_existing(args.pred))
    unc = storage.read_map(_existing(args.unc))
    pl = make_pseudo_label(pred, unc, args.delta)
    _write(Path(args.out), storage.kitti_png_write(pl.disparity, pl.validity))
    summary = {"delta": pl.delta_percent, "threshold": pl.threshold_value,
               "valid_fraction": pl.valid_fraction, "n_valid": int(pl.validity.sum())}
    if args.gt:
        gt, gmask = storage.read_disparity(_existing(args.gt))
        summary["d1_dense"] = error_stats(pred, gt, gmask).d1_all
        summary["d1_retained"] = error_stats(pred, gt, gmask & pl.validity).d1_all
    print(_dump(summary), end="")
    return 0


def cmd_metrics(args) -> int:
    pred, gt, mask = _pred_gt(args)
    text = error_stats(pred, gt, mask).to_json() + "\n"
    if args.out:
        _write(Path(args.out), text)
    print(text, end="")
    return 0


# -- bench -----------------------------------------------------------------------

def cmd_bench(args) -> int:
    scene = SceneSpec(width=args.width, height=args.height, d_max=args.d_max, seed=args.seed)
    cfg = BenchConfig(scene=scene, noise_sigma=args.noise, matcher=args.matcher, window=args.window,
                      temperatures=(1.0, args.t), delta=args.delta, per_s=args.s)
    results, checks = run_domain_shift(cfg)
    for c in checks:
        print(c.line())
    if args.out:
        out = Path(args.out)
        for name, curve in results["roc"].items():
            _write(out / f"roc_{name}.csv", curve.to_csv())
        _write(out / "summary.json", _dump({k: results[k] for k in ("means", "error", "pseudo")}))
    ok = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return 0 if ok else 1


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stereodist", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, metric=True):
        p.add_argument("--t", type=float, default=16.0, help="softmax temperature (default 16)")
        if metric:
            p.add_argument("--metric", choices=[k.value for k in MetricKind], default="per")
        p.add_argument("--s", type=float, default=0.5, help="PER scale")

    p = sub.add_parser("estimate", help="cost volume -> disparity + uncertainty maps")
    src = p.add_argument_group("input (one of)")
    src.add_argument("--scene", help="scene JSON (SceneSpec fields)")
    src.add_argument("--volume", help="raw cost volume (.cvol)")
    src.add_argument("--left")
    src.add_argument("--right")
    p.add_argument("--matcher", choices=sorted(MATCHERS), default="census")
    p.add_argument("--window", type=int, default=9)
    p.add_argument("--d-max", type=int, default=None)
    p.add_argument("--save-volume", action="store_true")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("scene", help="render a seeded stereogram to PGM/PNG16/PFM files")
    p.add_argument("--config")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scene)

    p = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--length", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=FD_STEP)
    p.add_argument("--sweep", action="store_true", help="also sweep h over 1e-4, 1e-5, 1e-6")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("adapt-sim", help="gradient-flow simulation of one pixel")
    p.add_argument("--case", choices=toys.CASES)
    p.add_argument("--cost", help="comma-separated cost vector (instead of --case)")
    p.add_argument("--gt", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--metric", choices=[k.value for k in MetricKind], default=None)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--max-steps", type=int, default=2000)
    p.add_argument("--no-line-search", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_adapt_sim)

    p = sub.add_parser("roc", help="sparsification curve from prediction, ground truth, uncertainty")
    p.add_argument("--pred", required=True, help="PFM disparity")
    p.add_argument("--gt", required=True, help="PNG16 or PFM ground truth")
    p.add_argument("--unc", required=True, help="PFM uncertainty map")
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--out", help="CSV path (a .json twin is written next to it)")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("pseudo", help="uncertainty-filtered PNG16 pseudo-label")
    p.add_argument("--pred", required=True)
    p.add_argument("--unc", required=True)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--gt", help="optional ground truth for a D1 report")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("metrics", help="D1_all / bad-1.0 / EPE of a prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="composite benchmarks")
    bsub = p.add_subparsers(dest="bench", required=True)
    b = bsub.add_parser("domain-shift", help="clean vs noisy stereogram, all directional checks")
    b.add_argument("--width", type=int, default=128)
    b.add_argument("--height", type=int, default=96)
    b.add_argument("--d-max", type=int, default=32)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--noise", type=float, default=20.0)
    b.add_argument("--matcher", choices=sorted(MATCHERS), default="census")
    b.add_argument("--window", type=int, default=9)
    b.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    b.add_argument("--out")
    common(b, metric=False)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, StereoDistError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
