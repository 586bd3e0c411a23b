"""Hand-built distributions and cost vectors used by tests, scripts and the CLI."""
from __future__ import annotations

import numpy as np

from .adapt_sim import costs_from_probs

SHARPNESS_GT = 10
N_SHARPNESS = 20


def _fill_rest(p, mass):
    rest = p == 0
    p[rest] = mass / rest.sum()
    return p


def sharpness_samples() -> dict:
    """Three 20-hypothesis distributions peaked at index 10, from sharp to multimodal."""
    uni = np.zeros(N_SHARPNESS)
    uni[10] = 0.96
    uni = _fill_rest(uni, 0.04)

    mostly = np.zeros(N_SHARPNESS)
    mostly[10] = 0.6
    mostly[9] = mostly[11] = 0.12
    mostly[4] = 0.06
    mostly = _fill_rest(mostly, 0.10)

    multi = np.zeros(N_SHARPNESS)
    multi[5] = multi[15] = 0.4
    multi[4] = multi[6] = multi[14] = multi[16] = 0.03
    multi = _fill_rest(multi, 0.08)
    return {"unimodal": uni, "predominantly_unimodal": mostly, "multimodal": multi}


def temperature_toy_costs() -> np.ndarray:
    """20 costs: global minimum 0 at index 10, a secondary valley (cost 0.5) at 15.

    The best/second-best margin is exactly 0.5 and all mass off the minimum
    sits mostly to its right, so the soft-argmin error shrinks monotonically
    as the temperature grows.
    """
    i = np.arange(N_SHARPNESS, dtype=np.float64)
    c = np.where(i < 10, 2.0 + 0.3 * (9 - i), 0.5 + 0.1 * np.abs(i - 15))
    c[10] = 0.0
    return c


N_CASE = 32


def wrong_peak_probs() -> np.ndarray:
    """Wrong peak 0.6 at index 14 (shoulders 0.08), faint 0.1 at the true index 6."""
    p = np.zeros(N_CASE)
    p[14] = 0.6
    p[13] = p[15] = 0.08
    p[6] = 0.1
    return _fill_rest(p, 0.14)


WRONG_PEAK_GT = 6.0


def multimodal_right_peak_probs() -> np.ndarray:
    """Three modes; the tallest (0.4) sits at the true index 10."""
    p = np.zeros(N_CASE)
    p[10] = 0.4
    p[9] = p[11] = 0.05
    p[22] = 0.3
    p[4] = 0.1
    return _fill_rest(p, 0.1)


RIGHT_PEAK_GT = 10.0


def bimodal_probs(eps=1e-3) -> np.ndarray:
    """Two near-equal peaks at 8 and 23; ``eps`` breaks the exact tie (a symmetric saddle)."""
    p = np.zeros(N_CASE)
    p[8] = 0.45 + eps
    p[23] = 0.45 - eps
    return _fill_rest(p, 0.10)


def near_uniform_costs(t, jitter=0.01, seed=0) -> np.ndarray:
    """Uniform distribution plus a seeded perturbation; exact uniform is a stationary point."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, jitter, N_CASE) / t


CASES = ("fig5a", "fig5b", "bimodal", "uniform")


def case_init(name, t):
    """``(cost vector, gt or None)`` for a named case, calibrated so the temperature-``t``
    softmax of the costs is the documented starting distribution."""
    if name == "fig5a":
        return costs_from_probs(multimodal_right_peak_probs(), t), RIGHT_PEAK_GT
    if name == "fig5b":
        return costs_from_probs(wrong_peak_probs(), t), WRONG_PEAK_GT
    if name == "bimodal":
        return costs_from_probs(bimodal_probs(), t), None
    if name == "uniform":
        return near_uniform_costs(t), None
    raise KeyError(f"unknown case {name!r}; valid cases: {', '.join(CASES)}")
