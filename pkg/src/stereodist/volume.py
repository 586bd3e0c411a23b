"""Cost / probability volumes and the softmax-based disparity readouts.

Volumes are plain float64 numpy arrays whose LAST axis indexes the disparity
hypotheses ``0..d_max`` (so ``d_max = costs.shape[-1] - 1``).  A single cost
vector of shape ``(d_max + 1,)`` is a one-pixel volume; an ``(H, W, d_max + 1)``
array is a full image volume.  Every operation works on either.

Low cost means a good match, so probabilities are ``softmax(-t * C)``.

Temperature and cost scale are confounded: ``softmax(-t * C)`` only sees the
product, so multiplying the costs by ``k`` is the same as multiplying ``t`` by
``k``.  Nothing here rescales costs; callers that want scale-free behaviour
must normalize the volume themselves.
"""
from __future__ import annotations

import numpy as np

from .errors import InputValidationError, StructuralError

__all__ = [
    "as_cost_volume",
    "d_max_of",
    "anisotropic_softmax",
    "log_anisotropic_softmax",
    "soft_argmin",
    "hard_argmin",
    "readout",
]


def as_cost_volume(costs, d_max=None) -> np.ndarray:
    """Return ``costs`` as a float64 array after checking shape and finiteness.

    Raises InputValidationError naming the first pixel that holds a
    non-finite cost.
    """
    arr = np.asarray(costs, dtype=np.float64)
    if arr.ndim < 1:
        raise StructuralError("a cost volume needs at least one (disparity) axis")
    if arr.shape[-1] < 2:
        raise StructuralError(f"need d_max >= 1, got {arr.shape[-1]} hypotheses")
    if any(n < 1 for n in arr.shape):
        raise StructuralError(f"empty dimension in volume shape {arr.shape}")
    if d_max is not None and arr.shape[-1] != d_max + 1:
        raise StructuralError(
            f"declared d_max={d_max} but volume stores {arr.shape[-1]} hypotheses"
        )
    bad = ~np.isfinite(arr)
    if bad.any():
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        pixel, index = where[:-1], where[-1]
        raise InputValidationError(
            f"non-finite cost {arr[where]!r} at pixel {pixel}, disparity index {index}"
        )
    return arr


def d_max_of(volume) -> int:
    return np.shape(volume)[-1] - 1


def _check_t(t):
    if not (np.isfinite(t) and t > 0):
        raise InputValidationError(f"temperature must be positive and finite, got {t!r}")


def anisotropic_softmax(costs, t=1.0, stable=True) -> np.ndarray:
    """Temperature-sharpened softmax over the disparity axis.

    ``p'(i) = exp(-t C(i)) / sum_j exp(-t C(j))``; ``t = 1`` is the plain
    softmax.  With ``stable=True`` the per-pixel maximum of ``-t C`` is
    subtracted before exponentiation (mathematically a no-op).  ``stable=False``
    evaluates the expression literally and will overflow / underflow to
    nan for large ``t * C``; it exists to demonstrate exactly that.
    """
    _check_t(t)
    c = as_cost_volume(costs)
    z = -t * c
    if stable:
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
    else:
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            e = np.exp(z)
    with np.errstate(invalid="ignore"):
        return e / e.sum(axis=-1, keepdims=True)


def log_anisotropic_softmax(costs, t=1.0) -> np.ndarray:
    """``log p'`` computed without forming ``p'`` (finite even where ``p'`` underflows)."""
    _check_t(t)
    z = -t * as_cost_volume(costs)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def soft_argmin(probs, d_max=None) -> np.ndarray:
    """Expected disparity index ``sum_i i * p(i)`` per pixel."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim < 1 or p.shape[-1] < 1:
        raise StructuralError("probability volume has no disparity axis")
    if d_max is not None and p.shape[-1] != d_max + 1:
        raise StructuralError(
            f"declared d_max={d_max} but volume stores {p.shape[-1]} hypotheses"
        )
    idx = np.arange(p.shape[-1], dtype=np.float64)
    return p @ idx


def hard_argmin(costs) -> np.ndarray:
    """Index of the minimum cost per pixel; ties go to the lowest index."""
    c = as_cost_volume(costs)
    return np.argmin(c, axis=-1)


def readout(costs, t=1.0):
    """``(anisotropic_softmax(costs, t), soft_argmin(...))`` in one call."""
    p = anisotropic_softmax(costs, t)
    return p, soft_argmin(p)
