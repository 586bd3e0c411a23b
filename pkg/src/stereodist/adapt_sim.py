"""Gradient flow on a single pixel's cost vector.

The cost vector stands in for a network's output logits: we descend
``[L'_s if gt] + lam * L_u`` directly in cost space and record how the
distribution sharpens (concentration) and where its peak ends up
(alignment).  No weights are shared between pixels, so effects that rely on
supervision propagating through a shared network are out of reach here.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DivergenceError, InputValidationError
from .objective import DEFAULT_LAMBDA, LossConfig, pixel_loss_and_grad
from .uncertainty import UncertaintyMetric
from .volume import as_cost_volume

MAX_HALVINGS = 30


@dataclass(frozen=True)
class SimConfig:
    t: float = 16.0
    lam: float | None = None
    metric: UncertaintyMetric = field(default_factory=UncertaintyMetric)
    step_size: float = 0.05
    max_steps: int = 2000
    line_search: bool = True
    gt: float | None = None
    # stop once the gradient max-norm falls below this (0 disables early stopping)
    grad_tol: float = 1e-12

    def __post_init__(self):
        if not self.step_size > 0:
            raise InputValidationError(f"step_size must be positive, got {self.step_size}")
        if self.max_steps < 1:
            raise InputValidationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.lam is None:
            object.__setattr__(self, "lam", DEFAULT_LAMBDA[self.metric.kind])

    @property
    def loss_config(self) -> LossConfig:
        return LossConfig(t=self.t, lam=self.lam, metric=self.metric)


@dataclass
class ConvergenceLog:
    loss: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    max_prob: list = field(default_factory=list)
    disparity: list = field(default_factory=list)
    step_size: list = field(default_factory=list)
    gt: float | None = None
    final_cost: np.ndarray | None = None
    gamma: float | None = None
    r2: float | None = None

    def __len__(self):
        return len(self.loss)

    def record(self, cost, t, loss, step):
        z = -t * cost
        z -= z.max()
        logp = z - np.log(np.exp(z).sum())
        p = np.exp(logp)
        self.loss.append(float(loss))
        self.entropy.append(max(float(-np.dot(p, logp)), 0.0))
        self.max_prob.append(float(p.max()))
        self.disparity.append(float(np.dot(p, np.arange(p.size))))
        self.step_size.append(float(step))

    @property
    def final_argmax(self) -> int:
        return int(np.argmin(self.final_cost))

    def steps_to(self, tol) -> int | None:
        """First step index with ``|d - gt| < tol`` (None if never reached or no gt)."""
        if self.gt is None:
            return None
        err = np.abs(np.asarray(self.disparity) - self.gt)
        hits = np.flatnonzero(err < tol)
        return int(hits[0]) if hits.size else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "loss", "entropy", "max_prob", "disparity"])
        for k in range(len(self)):
            w.writerow([k, repr(self.loss[k]), repr(self.entropy[k]),
                        repr(self.max_prob[k]), repr(self.disparity[k])])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {
            "steps": len(self) - 1,
            "final_loss": self.loss[-1],
            "final_entropy": self.entropy[-1],
            "final_max_prob": self.max_prob[-1],
            "final_disparity": self.disparity[-1],
            "final_argmax": self.final_argmax,
            "gamma": self.gamma,
            "r2": self.r2,
        }
        if self.gt is not None:
            out.update(
                gt=self.gt,
                final_abs_error=abs(self.disparity[-1] - self.gt),
                steps_to_0_5=self.steps_to(0.5),
                steps_to_0_1=self.steps_to(0.1),
            )
        return out


def simulate_pixel(init_cost, cfg: SimConfig) -> ConvergenceLog:
    c = as_cost_volume(init_cost).copy()
    if c.ndim != 1:
        raise InputValidationError("simulate_pixel takes a single cost vector")
    if cfg.gt is not None and not 0 <= cfg.gt <= c.size - 1:
        raise InputValidationError(f"gt={cfg.gt} outside [0, {c.size - 1}]")
    lc = cfg.loss_config
    log = ConvergenceLog(gt=cfg.gt)
    loss, g = pixel_loss_and_grad(c, lc, cfg.gt)
    if not np.isfinite(loss):
        raise DivergenceError(0)
    log.record(c, cfg.t, loss, 0.0)

    for step in range(1, cfg.max_steps + 1):
        if not np.all(np.isfinite(g)):
            raise DivergenceError(step, f"gradient became non-finite at step {step}")
        if cfg.grad_tol and np.abs(g).max() < cfg.grad_tol:
            break
        eta = cfg.step_size
        trial = c - eta * g
        new_loss, new_g = pixel_loss_and_grad(trial, lc, cfg.gt)
        if cfg.line_search:
            halvings = 0
            while not new_loss <= loss and halvings < MAX_HALVINGS:
                eta *= 0.5
                halvings += 1
                trial = c - eta * g
                new_loss, new_g = pixel_loss_and_grad(trial, lc, cfg.gt)
            if not new_loss <= loss:
                # no decreasing step found; stay put so the loss stays monotone
                eta, trial, new_loss, new_g = 0.0, c, loss, g
        if not np.isfinite(new_loss):
            raise DivergenceError(step)
        c, loss, g = trial, new_loss, new_g
        log.record(c, cfg.t, loss, eta)

    log.final_cost = c
    return log


@dataclass
class CaseBResult:
    log: ConvergenceLog
    reached_gt: bool


def simulate_case_b(init_cost, gt, cfg: SimConfig) -> CaseBResult:
    """Run a wrong-peak init and report whether the final arg-max moved onto ``gt``."""
    cfg = SimConfig(**{**cfg.__dict__, "gt": float(gt)})
    log = simulate_pixel(init_cost, cfg)
    return CaseBResult(log, log.final_argmax == int(round(gt)))


def simulate_batch(inits, cfg: SimConfig, workers=None) -> list[ConvergenceLog]:
    """Simulate independent pixels, optionally on a thread pool.

    ``workers`` defaults to the ``STEREODIST_THREADS`` environment variable (1 if unset).
    """
    if workers is None:
        workers = int(os.environ.get("STEREODIST_THREADS", "1"))
    if workers <= 1:
        return [simulate_pixel(c, cfg) for c in inits]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: simulate_pixel(c, cfg), inits))


# -- decay-rate fit ----------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    gamma: float
    r2: float
    window: tuple


def fit_decay_rate(log_or_entropy, window=None) -> DecayFit:
    """Least-squares fit of ``ln H = a - gamma * step`` over ``window = (start, stop)``.

    ``stop`` is exclusive.  A constant sequence fits perfectly (R^2 = 1, gamma = 0).
    """
    h = np.asarray(getattr(log_or_entropy, "entropy", log_or_entropy), dtype=np.float64)
    start, stop = window if window is not None else (0, h.size)
    stop = min(stop, h.size)
    if stop - start < 2:
        raise DegenerateInputError(f"decay fit needs >= 2 steps, window is {(start, stop)}")
    seg = h[start:stop]
    if np.any(seg <= 0):
        raise DegenerateInputError("entropy must be strictly positive over the fit window")
    x = np.arange(start, stop, dtype=np.float64)
    y = np.log(seg)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    # tiny ss_tot is round-off from ln of a constant sequence
    r2 = 1.0 if ss_tot <= 1e-24 * max(1.0, y.size) else 1.0 - ss_res / ss_tot
    gamma = -slope if ss_tot > 1e-24 * max(1.0, y.size) else 0.0
    return DecayFit(float(gamma), float(r2), (start, stop))


def concentration_window(log: ConvergenceLog, max_prob=0.99, plateau=0.95) -> tuple:
    """``(start, stop)`` steps of active entropy collapse.

    Starts at the last step before entropy first falls below ``plateau * H0``
    (a near-uniform init sits on a flat plateau first) and ends, inclusive, at
    the first step whose peak probability exceeds ``max_prob``.
    """
    h = np.asarray(log.entropy)
    mp = np.asarray(log.max_prob)
    hits = np.flatnonzero(mp > max_prob)
    stop = int(hits[0]) + 1 if hits.size else mp.size
    left = np.flatnonzero(h < plateau * h[0])
    start = max(int(left[0]) - 1, 0) if left.size else 0
    start = min(start, max(stop - 2, 0))
    return (start, max(stop, start + 2))


# -- toy initializations -----------------------------------------------------

def costs_from_probs(p, t=1.0) -> np.ndarray:
    """Costs whose temperature-``t`` softmax is ``p`` (up to a per-pixel constant)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise InputValidationError("probabilities must be strictly positive to invert")
    c = -np.log(p / p.sum()) / t
    return c - c.min()


def random_multimodal_init(rng, n=32, t=1.0, modes=(2, 4)) -> np.ndarray:
    """Cost vector whose temperature-``t`` softmax has 2-4 comparable peaks."""
    k = int(rng.integers(modes[0], modes[1] + 1))
    centers = rng.choice(n, size=k, replace=False)
    weights = rng.uniform(0.5, 1.0, size=k)
    idx = np.arange(n)
    p = np.full(n, 0.02 / n)
    for cen, w in zip(centers, weights):
        p += w * np.exp(-0.5 * ((idx - cen) / 1.0) ** 2)
    return costs_from_probs(p / p.sum(), t)
