"""Uncertainty-thresholded pseudo-labels.

The threshold is the nearest-rank ``(100 - delta)``-th percentile of the
uncertainty values; pixels strictly above it are dropped (disparity 0,
invalid) and pixels at or below it keep their prediction.  With distinct
uncertainty values this retains ``ceil((1 - delta/100) * n)`` pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputValidationError, StructuralError

DEFAULT_DELTA = 20.0


@dataclass(frozen=True)
class PseudoLabel:
    disparity: np.ndarray
    validity: np.ndarray
    delta_percent: float
    threshold_value: float

    @property
    def valid_fraction(self) -> float:
        return float(self.validity.mean())


def nearest_rank_percentile(values, q) -> float:
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise InputValidationError("percentile of an empty set")
    rank = max(1, math.ceil(q / 100.0 * v.size - 1e-9))
    return float(v[rank - 1])


def make_pseudo_label(disp, unc, delta_percent=DEFAULT_DELTA) -> PseudoLabel:
    if not (0 < delta_percent < 100):
        raise InputValidationError(f"delta must lie strictly between 0 and 100, got {delta_percent}")
    disp = np.asarray(disp, dtype=np.float64)
    unc = np.asarray(unc, dtype=np.float64)
    if disp.shape != unc.shape:
        raise StructuralError(f"disparity shape {disp.shape} != uncertainty shape {unc.shape}")
    thr = nearest_rank_percentile(unc, 100.0 - delta_percent)
    valid = unc <= thr
    return PseudoLabel(np.where(valid, disp, 0.0), valid, float(delta_percent), thr)
