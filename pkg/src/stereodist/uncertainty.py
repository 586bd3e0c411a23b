"""Per-pixel uncertainty of disparity distributions and the mean-uncertainty loss.

All three measures take a probability volume (last axis = disparity) and
return a map over the leading axes:

* MSM      ``1 - p(i1)``                                      range [0, 1)
* Entropy  ``-sum p ln p``  (natural log, ``0 ln 0 = 0``)      range [0, ln(d_max+1)]
* PER      ``mean_{i != i1} exp(-(p(i1) - p(i))^2 / s^2)``     range (0, 1]

``i1`` is the arg-max of ``p`` with ties broken toward the lowest index.
PER averages over the ``M = d_max`` hypotheses other than ``i1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InputValidationError, StructuralError

DEFAULT_PER_SCALE = 0.5


class MetricKind(str, enum.Enum):
    MSM = "msm"
    ENTROPY = "entropy"
    PER = "per"


@dataclass(frozen=True)
class UncertaintyMetric:
    kind: MetricKind = MetricKind.ENTROPY
    per_s: float = DEFAULT_PER_SCALE

    def __post_init__(self):
        try:
            kind = MetricKind(self.kind)
        except ValueError:
            valid = ", ".join(k.value for k in MetricKind)
            raise InputValidationError(f"unknown metric {self.kind!r}; valid: {valid}") from None
        object.__setattr__(self, "kind", kind)
        if not self.per_s > 0:
            raise InputValidationError(f"PER scale must be positive, got {self.per_s}")

    @classmethod
    def parse(cls, name, s=DEFAULT_PER_SCALE):
        return cls(str(name).lower(), s)


def _probs(probs):
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim < 1 or p.shape[-1] < 1:
        raise StructuralError("probability volume has no disparity axis")
    return p


def peak_index(probs) -> np.ndarray:
    """Arg-max over disparity; ``np.argmax`` already returns the lowest tied index."""
    return np.argmax(_probs(probs), axis=-1)


def msm(probs) -> np.ndarray:
    p = _probs(probs)
    return 1.0 - p.max(axis=-1)


def entropy(probs) -> np.ndarray:
    p = _probs(probs)
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(np.where(p > 0, p * np.log(safe), 0.0), axis=-1)


def per(probs, s=DEFAULT_PER_SCALE) -> np.ndarray:
    p = _probs(probs)
    if not s > 0:
        raise InputValidationError(f"PER scale must be positive, got {s}")
    m = p.shape[-1] - 1
    if m < 1:
        raise DegenerateInputError("PER needs at least two disparity hypotheses (M = 0)")
    top = p.max(axis=-1, keepdims=True)
    k = np.exp(-((top - p) ** 2) / s**2)
    # the i1 term is exp(0) = 1 exactly; drop it instead of indexing
    return (k.sum(axis=-1) - 1.0) / m


def uncertainty_map(probs, metric: UncertaintyMetric) -> np.ndarray:
    kind = metric.kind
    if kind is MetricKind.MSM:
        return msm(probs)
    if kind is MetricKind.PER:
        return per(probs, metric.per_s)
    return entropy(probs)


def uncertainty_loss(probs, metric: UncertaintyMetric, mask=None) -> float:
    """Mean of the uncertainty map over the valid pixels (all pixels when ``mask`` is None)."""
    u = uncertainty_map(probs, metric)
    if mask is None:
        if u.size == 0:
            raise DegenerateInputError("no pixels")
        return float(u.mean())
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != u.shape:
        raise StructuralError(f"mask shape {mask.shape} != map shape {u.shape}")
    n = int(mask.sum())
    if n == 0:
        raise DegenerateInputError("validity mask has no valid pixels")
    return float(u[mask].sum() / n)


def to_gray8(u, lo=None, hi=None) -> np.ndarray:
    """Linearly map an uncertainty map to uint8; white is the highest uncertainty.

    ``lo``/``hi`` default to the map's own range.  A constant map becomes black.
    """
    u = np.asarray(u, dtype=np.float64)
    lo = float(np.min(u)) if lo is None else lo
    hi = float(np.max(u)) if hi is None else hi
    if hi <= lo:
        return np.zeros(u.shape, dtype=np.uint8)
    scaled = np.clip((u - lo) / (hi - lo), 0.0, 1.0)
    return np.round(scaled * 255.0).astype(np.uint8)
