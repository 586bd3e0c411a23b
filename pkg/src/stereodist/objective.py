"""Losses on cost volumes and their closed-form gradients.

Everything is differentiated with respect to the raw costs ``C``.  The one
identity all gradients lean on is the anisotropic-softmax Jacobian

    dp'(i)/dC(j) = t * p'(i) * (p'(j) - [i == j])

so for any per-pixel function ``U(p')`` with ``g = dU/dp'``

    dU/dC(j) = t * p'(j) * (sum_i g(i) p'(i) - g(j)).

Smooth-L1 through the soft argmin then gives
``dL/dC(j) = rho'(d' - d) * t * p'(j) * (d' - j) / N`` with ``rho'`` the clamp
to [-1, 1] (so the kink at ``|x| = 1`` takes the value +-1).

MSM and PER depend on the arg-max index ``i1``; it is held fixed when
differentiating (piecewise-constant, so this is the gradient almost
everywhere).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateInputError, InputValidationError, ResampleSignal, StructuralError
from .uncertainty import MetricKind, UncertaintyMetric, uncertainty_loss, uncertainty_map
from .volume import anisotropic_softmax, as_cost_volume, log_anisotropic_softmax, soft_argmin

DEFAULT_LAMBDA = {MetricKind.PER: 1.0, MetricKind.MSM: 0.5, MetricKind.ENTROPY: 0.125}
DEFAULT_TEMPERATURE = 16.0
FD_STEP = 1e-5


@dataclass(frozen=True)
class LossConfig:
    t: float = DEFAULT_TEMPERATURE
    lam: float | None = None
    metric: UncertaintyMetric = field(default_factory=UncertaintyMetric)

    def __post_init__(self):
        if not self.t > 0:
            raise InputValidationError(f"temperature must be positive, got {self.t}")
        if self.lam is None:
            object.__setattr__(self, "lam", DEFAULT_LAMBDA[self.metric.kind])
        if self.lam < 0:
            raise InputValidationError(f"lambda must be non-negative, got {self.lam}")


# -- smooth L1 ---------------------------------------------------------------

def rho(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def rho_prime(x):
    return np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)


def _mask_for(shape, mask):
    if mask is None:
        return np.ones(shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != tuple(shape):
        raise StructuralError(f"mask shape {mask.shape} != map shape {tuple(shape)}")
    return mask


def _n_valid(mask):
    n = int(mask.sum())
    if n == 0:
        raise DegenerateInputError("validity mask has no valid pixels")
    return n


def smooth_l1(pred, gt, mask=None) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.broadcast_to(np.asarray(gt, dtype=np.float64), pred.shape)
    mask = _mask_for(pred.shape, mask)
    n = _n_valid(mask)
    return float(rho(gt - pred)[mask].sum() / n)


# -- Jacobians ---------------------------------------------------------------

def plain_softmax_jacobian(p) -> np.ndarray:
    """``p(i) * (p(j) - [i == j])`` evaluated elementwise at the given ``p``."""
    p = np.asarray(p, dtype=np.float64)
    eye = np.eye(p.shape[-1])
    return p[..., :, None] * (p[..., None, :] - eye)


def softmax_jacobian(p, t) -> np.ndarray:
    """``dp'/dC`` at ``p' = p`` via the logit chain rule (``z = -t C``)."""
    p = np.asarray(p, dtype=np.float64)
    dp_dz = np.einsum("...i,ij->...ij", p, np.eye(p.shape[-1])) - p[..., :, None] * p[..., None, :]
    return dp_dz * (-t)


def chain_through_softmax(g, p, t) -> np.ndarray:
    """Pull a per-pixel gradient ``g = dU/dp`` back to ``dU/dC``."""
    return t * p * (np.sum(g * p, axis=-1, keepdims=True) - g)


# -- gradients ---------------------------------------------------------------

def grad_smooth_l1_wrt_cost(cost, gt, mask=None, t=1.0) -> np.ndarray:
    c = as_cost_volume(cost)
    p = anisotropic_softmax(c, t)
    d = soft_argmin(p)
    gt = np.broadcast_to(np.asarray(gt, dtype=np.float64), d.shape)
    mask = _mask_for(d.shape, mask)
    n = _n_valid(mask)
    scale = np.where(mask, rho_prime(d - gt), 0.0) / n
    j = np.arange(c.shape[-1], dtype=np.float64)
    return scale[..., None] * t * p * (d[..., None] - j)


def uncertainty_grad_wrt_probs(p, metric: UncertaintyMetric, logp=None) -> np.ndarray:
    """``dU/dp`` per pixel, with the arg-max index held fixed for MSM/PER."""
    p = np.asarray(p, dtype=np.float64)
    kind = metric.kind
    if kind is MetricKind.ENTROPY:
        if logp is None:
            logp = np.log(p)
        return -1.0 - logp
    i1 = np.argmax(p, axis=-1)[..., None]
    if kind is MetricKind.MSM:
        g = np.zeros_like(p)
        np.put_along_axis(g, i1, -1.0, axis=-1)
        return g
    m = p.shape[-1] - 1
    if m < 1:
        raise DegenerateInputError("PER needs at least two disparity hypotheses (M = 0)")
    s2 = metric.per_s**2
    gap = np.take_along_axis(p, i1, axis=-1) - p
    g = 2.0 * gap / (m * s2) * np.exp(-gap * gap / s2)
    np.put_along_axis(g, i1, 0.0, axis=-1)
    np.put_along_axis(g, i1, -g.sum(axis=-1, keepdims=True), axis=-1)
    return g


def grad_uncertainty_wrt_cost(cost, metric: UncertaintyMetric, t=1.0, mask=None) -> np.ndarray:
    """Gradient of the mean-uncertainty loss over ``mask`` (all pixels by default)."""
    c = as_cost_volume(cost)
    mask = _mask_for(c.shape[:-1], mask)
    n = _n_valid(mask)
    if metric.kind is MetricKind.ENTROPY:
        # closed form t p (ln p + H), using log-softmax so tiny p stays exact
        logp = log_anisotropic_softmax(c, t)
        p = np.exp(logp)
        h = -np.sum(p * logp, axis=-1, keepdims=True)
        g = t * p * (logp + h)
    else:
        p = anisotropic_softmax(c, t)
        g = chain_through_softmax(uncertainty_grad_wrt_probs(p, metric), p, t)
    return np.where(mask[..., None], g, 0.0) / n


# -- combined losses ---------------------------------------------------------

def combined_loss(source_cost, source_gt, source_mask, target_cost, cfg: LossConfig):
    """``(total, source smooth-L1 via anisotropic readout, target mean uncertainty)``."""
    p_src = anisotropic_softmax(source_cost, cfg.t)
    ls = smooth_l1(soft_argmin(p_src), source_gt, source_mask)
    # the uncertainty term reads the target through the same temperature-t softmax
    p_tgt = anisotropic_softmax(target_cost, cfg.t)
    lu = uncertainty_loss(p_tgt, cfg.metric)
    return ls + cfg.lam * lu, ls, lu


def grad_combined_loss(source_cost, source_gt, source_mask, target_cost, cfg: LossConfig):
    """Gradients of ``combined_loss``'s total w.r.t. the source and target volumes."""
    g_src = grad_smooth_l1_wrt_cost(source_cost, source_gt, source_mask, cfg.t)
    g_tgt = cfg.lam * grad_uncertainty_wrt_cost(target_cost, cfg.metric, cfg.t)
    return g_src, g_tgt


def pixel_loss(cost, cfg: LossConfig, gt=None) -> float:
    """Single-volume objective ``[L'_s if gt given] + lam * L_u`` used by the simulator."""
    p = anisotropic_softmax(cost, cfg.t)
    total = cfg.lam * uncertainty_loss(p, cfg.metric) if cfg.lam else 0.0
    if gt is not None:
        total += smooth_l1(soft_argmin(p), gt)
    return float(total)


def grad_pixel_loss(cost, cfg: LossConfig, gt=None) -> np.ndarray:
    c = as_cost_volume(cost)
    g = cfg.lam * grad_uncertainty_wrt_cost(c, cfg.metric, cfg.t) if cfg.lam else np.zeros_like(c)
    if gt is not None:
        g = g + grad_smooth_l1_wrt_cost(c, gt, None, cfg.t)
    return g


def pixel_loss_and_grad(cost, cfg: LossConfig, gt=None):
    """Fused ``(pixel_loss, grad_pixel_loss)`` for one already-validated cost vector.

    Shares the softmax between value and gradient; the simulator calls this
    thousands of times per run.
    """
    c = np.asarray(cost, dtype=np.float64)
    t = cfg.t
    z = -t * c
    z = z - z.max()
    e = np.exp(z)
    total_e = e.sum()
    p = e / total_e
    loss = 0.0
    g = np.zeros_like(c)
    if cfg.lam:
        kind = cfg.metric.kind
        if kind is MetricKind.ENTROPY:
            logp = z - np.log(total_e)
            h = -float(np.dot(p, logp))
            loss += cfg.lam * h
            g += cfg.lam * t * p * (logp + h)
        else:
            u = float(uncertainty_map(p, cfg.metric))
            loss += cfg.lam * u
            g += cfg.lam * chain_through_softmax(uncertainty_grad_wrt_probs(p, cfg.metric), p, t)
    if gt is not None:
        j = np.arange(c.size, dtype=np.float64)
        d = float(np.dot(p, j))
        x = d - gt
        loss += float(rho(x))
        g += float(rho_prime(x)) * t * p * (d - j)
    return loss, g


# -- finite-difference harness -----------------------------------------------
#
# Every registered loss is pixel-separable: the total is the sum of per-pixel
# terms and pixel q's term depends only on C[q, :].  The harness therefore
# perturbs entry j of *every* pixel at once and reads each pixel's own
# difference quotient, which costs 2 * (d_max + 1) vectorized evaluations.


class LossSpec(NamedTuple):
    terms: Callable  # (cost, **params) -> per-pixel contributions, summing to the loss
    grad: Callable   # (cost, **params) -> dL/dC


def _metric(params):
    m = params.get("metric", "entropy")
    return m if isinstance(m, UncertaintyMetric) else UncertaintyMetric.parse(m, params.get("s", 0.5))


def _sl1_terms(c, t=1.0, gt=0.0, mask=None, **_):
    d = soft_argmin(anisotropic_softmax(c, t))
    mask = _mask_for(d.shape, mask)
    n = _n_valid(mask)
    gt = np.broadcast_to(np.asarray(gt, dtype=np.float64), d.shape)
    return np.where(mask, rho(gt - d), 0.0) / n


def _unc_terms(kind):
    def terms(c, t=1.0, mask=None, **params):
        u = uncertainty_map(anisotropic_softmax(c, t), _metric({**params, "metric": kind}))
        mask = _mask_for(u.shape, mask)
        return np.where(mask, u, 0.0) / _n_valid(mask)

    def grad(c, t=1.0, mask=None, **params):
        return grad_uncertainty_wrt_cost(c, _metric({**params, "metric": kind}), t, mask)

    return LossSpec(terms, grad)


def _combined_terms(c, t=1.0, gt=0.0, mask=None, lam=None, **params):
    metric = _metric(params)
    lam = DEFAULT_LAMBDA[metric.kind] if lam is None else lam
    u = uncertainty_map(anisotropic_softmax(c, t), metric)
    return _sl1_terms(c, t, gt, mask) + lam * u / u.size


def _combined_grad(c, t=1.0, gt=0.0, mask=None, lam=None, **params):
    metric = _metric(params)
    lam = DEFAULT_LAMBDA[metric.kind] if lam is None else lam
    return grad_smooth_l1_wrt_cost(c, gt, mask, t) + lam * grad_uncertainty_wrt_cost(c, metric, t)


def _linear_terms(c, weights=None, **_):
    return np.sum(np.broadcast_to(weights, c.shape) * c, axis=-1)


def _linear_grad(c, weights=None, **_):
    return np.broadcast_to(np.asarray(weights, dtype=np.float64), c.shape).copy()


LOSSES: dict[str, LossSpec] = {
    "linear": LossSpec(_linear_terms, _linear_grad),
    "smooth_l1": LossSpec(_sl1_terms, lambda c, t=1.0, gt=0.0, mask=None, **_: grad_smooth_l1_wrt_cost(c, gt, mask, t)),
    "entropy": _unc_terms("entropy"),
    "msm": _unc_terms("msm"),
    "per": _unc_terms("per"),
    "combined": LossSpec(_combined_terms, _combined_grad),
}


@dataclass
class FDReport:
    loss_id: str
    max_abs_err: float
    max_rel_err: float
    argmax_location: tuple
    worst_pixel_rel_err: float = 0.0

    def ok(self, tol=1e-6) -> bool:
        return self.max_rel_err < tol


def check_differentiable(cost, loss_id, params, h):
    """Raise ResampleSignal when ``cost`` sits near a kink or an arg-max tie."""
    c = np.asarray(cost, dtype=np.float64)
    uses_argmax = loss_id in ("msm", "per") or (
        loss_id == "combined" and _metric(params).kind is not MetricKind.ENTROPY
    )
    if uses_argmax:
        two = np.sort(c, axis=-1)[..., :2]
        if np.any(two[..., 1] - two[..., 0] <= 10 * h):
            raise ResampleSignal("arg-max tie within 10h of the sample")
    if loss_id in ("smooth_l1", "combined"):
        d = soft_argmin(anisotropic_softmax(c, params.get("t", 1.0)))
        gt = np.broadcast_to(np.asarray(params.get("gt", 0.0), dtype=np.float64), d.shape)
        mask = _mask_for(d.shape, params.get("mask"))
        if np.any(mask & (np.abs(np.abs(d - gt) - 1.0) < 1e-3)):
            raise ResampleSignal("smooth-L1 kink |d - gt| = 1 within 1e-3")


def finite_difference_check(cost, loss_id, params=None, h=FD_STEP, registry=None) -> FDReport:
    """Compare the analytic gradient of ``loss_id`` with central differences.

    ``max_rel_err`` is normwise over the whole gradient volume:
    ``max |analytic - fd|`` divided by the larger of the two gradients'
    max-norms (floored at 1e-12).  Both error sources of central differences,
    O(h^2) truncation and O(eps / h) round-off, are absolute, so this is the
    well-conditioned measure.  ``worst_pixel_rel_err`` applies the same ratio
    pixel by pixel; it blows up wherever one pixel's gradient nearly vanishes
    (a saturated softmax, or a residual close to zero) and is reported only
    as a diagnostic.
    """
    if not h > 0:
        raise InputValidationError(f"finite-difference step must be positive, got {h}")
    params = dict(params or {})
    spec = (registry or LOSSES)[loss_id]
    c = as_cost_volume(cost)
    check_differentiable(c, loss_id, params, h)

    analytic = np.asarray(spec.grad(c, **params), dtype=np.float64)
    fd = np.empty_like(c)
    for j in range(c.shape[-1]):
        plus = c.copy()
        minus = c.copy()
        plus[..., j] += h
        minus[..., j] -= h
        fd[..., j] = (spec.terms(plus, **params) - spec.terms(minus, **params)) / (2 * h)

    err = np.abs(analytic - fd)
    scale = max(float(np.abs(analytic).max()), float(np.abs(fd).max()), 1e-12)
    pixel_scale = np.maximum(np.abs(analytic).max(axis=-1), np.abs(fd).max(axis=-1))
    pixel_rel = err.max(axis=-1) / np.maximum(pixel_scale, 1e-12)
    location = np.unravel_index(int(np.argmax(err)), err.shape)
    return FDReport(
        loss_id=loss_id,
        max_abs_err=float(err.max()),
        max_rel_err=float(err.max()) / scale,
        argmax_location=tuple(int(i) for i in location),
        worst_pixel_rel_err=float(pixel_rel.max()),
    )


def sample_checkable_costs(rng, n=100, length=32, t=1.0, h=FD_STEP, high=3.0, max_tries=1000):
    """Draw ``n`` cost vectors from U[0, high) with ground truths from U[0, length - 1).

    Rows that sit within ``10 h`` of an arg-max tie or within 1e-3 of the
    smooth-L1 kink at temperature ``t`` are redrawn, so every loss in
    :data:`LOSSES` is differentiable at every row.
    """
    costs = rng.uniform(0.0, high, (n, length))
    gt = rng.uniform(0.0, length - 1, n)
    for _ in range(max_tries):
        two = np.sort(costs, axis=-1)[:, :2]
        d = soft_argmin(anisotropic_softmax(costs, t))
        bad = (two[:, 1] - two[:, 0] <= 10 * h) | (np.abs(np.abs(d - gt) - 1.0) < 1e-3)
        if not bad.any():
            return costs, gt
        k = int(bad.sum())
        costs[bad] = rng.uniform(0.0, high, (k, length))
        gt[bad] = rng.uniform(0.0, length - 1, k)
    raise ResampleSignal(f"could not draw {n} differentiable samples in {max_tries} rounds")
